//! Linear quantum stochastic differential equations
//! dx = Ax dt + B dw, dy = Cx dt + D dw, with commutation and Ito matrices.
//!
//! The factor i of the commutation algebra is cancelled throughout, so every
//! condition is checked in real arithmetic.

use crate::matops::{self, diag_j, max_abs, op_norm, to_complex, MatError};
use crate::scalar::{lit, to_f64, Real, Tolerances};
use crate::{ComplexMatrix, RealMatrix};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsdeError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid commutation matrix: {0}")]
    Commutation(String),
    #[error("invalid Ito matrix: {0}")]
    Ito(String),
    #[error("convention violated: {0}")]
    Convention(String),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// Shape of a commutation matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaKind {
    /// diag(J, …, J).
    Canonical,
    /// diag(0_{n′}, J, …, J).
    Degenerate { nprime: usize },
    /// A symmetric permutation of a degenerate canonical matrix.
    Permuted { nprime: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommutationMatrix<T: Real> {
    kind: ThetaKind,
    theta: RealMatrix<T>,
}

impl<T: Real> CommutationMatrix<T> {
    pub fn canonical(n: usize) -> Result<Self, QsdeError> {
        if n % 2 != 0 {
            return Err(QsdeError::Commutation(format!("canonical form needs even n, got {n}")));
        }
        Ok(CommutationMatrix {
            kind: ThetaKind::Canonical,
            theta: diag_j(n / 2),
        })
    }

    /// diag(0_{n′}, J, …, J); `nprime = 0` gives the canonical matrix.
    pub fn degenerate(n: usize, nprime: usize) -> Result<Self, QsdeError> {
        if nprime > n || (n - nprime) % 2 != 0 {
            return Err(QsdeError::Commutation(format!(
                "need 0 ≤ n′ ≤ n with n − n′ even, got n={n}, n′={nprime}"
            )));
        }
        if nprime == 0 {
            return Self::canonical(n);
        }
        let theta = matops::block_diag(&[&DMatrix::zeros(nprime, nprime), &diag_j((n - nprime) / 2)]);
        Ok(CommutationMatrix {
            kind: ThetaKind::Degenerate { nprime },
            theta,
        })
    }

    /// Accepts any antisymmetric matrix whose entries are 0 or ±1 with at
    /// most one nonzero per row, i.e. a permuted degenerate canonical form.
    pub fn from_matrix(theta: RealMatrix<T>) -> Result<Self, QsdeError> {
        let n = theta.nrows();
        if theta.ncols() != n {
            return Err(QsdeError::Commutation("Θ must be square".to_string()));
        }
        let tol = lit::<T>(1e-12);
        if max_abs(&(&theta + theta.transpose())) > tol {
            return Err(QsdeError::Commutation("Θ must be antisymmetric".to_string()));
        }
        let mut partner = vec![None; n];
        for i in 0..n {
            for j in 0..n {
                let v = theta[(i, j)];
                if v.abs() <= tol {
                    continue;
                }
                if (v.abs() - T::one()).abs() > tol || partner[i].is_some() {
                    return Err(QsdeError::Commutation(
                        "Θ is not canonical up to permutation".to_string(),
                    ));
                }
                partner[i] = Some(j);
            }
        }
        let nprime = partner.iter().filter(|p| p.is_none()).count();
        let candidate = Self::degenerate(n, nprime)?;
        let kind = if max_abs(&(&theta - &candidate.theta)) <= tol {
            candidate.kind
        } else {
            ThetaKind::Permuted { nprime }
        };
        let theta = theta.map(|v| if v.abs() <= tol { T::zero() } else { v.signum() });
        Ok(CommutationMatrix { kind, theta })
    }

    pub fn kind(&self) -> ThetaKind {
        self.kind
    }

    pub fn matrix(&self) -> &RealMatrix<T> {
        &self.theta
    }

    pub fn n(&self) -> usize {
        self.theta.nrows()
    }

    /// Number of classical (commuting) variables.
    pub fn nprime(&self) -> usize {
        match self.kind {
            ThetaKind::Canonical => 0,
            ThetaKind::Degenerate { nprime } | ThetaKind::Permuted { nprime } => nprime,
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.kind == ThetaKind::Canonical
    }

    /// Index order `idx` with Θ[idx[i], idx[j]] = diag(0_{n′}, J, …, J)[i, j].
    pub fn canonicalizing_order(&self) -> Vec<usize> {
        let n = self.n();
        let mut classical = Vec::new();
        let mut pairs = Vec::new();
        for i in 0..n {
            match (0..n).find(|&j| self.theta[(i, j)] != T::zero()) {
                None => classical.push(i),
                Some(j) if self.theta[(i, j)] > T::zero() => pairs.push((i, j)),
                Some(_) => {}
            }
        }
        pairs.sort();
        let mut order = classical;
        for (i, j) in pairs {
            order.push(i);
            order.push(j);
        }
        order
    }
}

/// Ito matrix F = S + i·Tim of the noise increments, dw dwᵀ = F dt.
#[derive(Clone, Debug, PartialEq)]
pub struct ItoMatrix<T: Real> {
    pub s: RealMatrix<T>,
    pub tim: RealMatrix<T>,
}

/// F = I + i·diag(J, …, J).
pub fn canonical_ito<T: Real>(n_w: usize) -> Result<ItoMatrix<T>, QsdeError> {
    if n_w % 2 != 0 {
        return Err(QsdeError::Ito(format!("canonical Ito matrix needs even n_w, got {n_w}")));
    }
    Ok(ItoMatrix {
        s: DMatrix::identity(n_w, n_w),
        tim: diag_j(n_w / 2),
    })
}

/// Splits a Hermitian F into its real symmetric and imaginary antisymmetric parts.
pub fn ito_decompose<T: Real>(f: &ComplexMatrix<T>) -> Result<ItoMatrix<T>, QsdeError> {
    if f.nrows() != f.ncols() {
        return Err(QsdeError::Ito("F must be square".to_string()));
    }
    let dev = matops::max_abs_c(&(f - f.adjoint()));
    if dev > lit::<T>(1e-9) * (T::one() + matops::max_abs_c(f)) {
        return Err(QsdeError::Ito(format!("F is not Hermitian (deviation {:.3e})", to_f64(dev))));
    }
    let h = matops::hermitian_part(f);
    Ok(ItoMatrix {
        s: matops::re_part(&h),
        tim: matops::im_part(&h),
    })
}

impl<T: Real> ItoMatrix<T> {
    /// Validates symmetry, antisymmetry and F ⪰ 0.
    pub fn from_parts(s: RealMatrix<T>, tim: RealMatrix<T>) -> Result<Self, QsdeError> {
        let n = s.nrows();
        if s.ncols() != n || tim.nrows() != n || tim.ncols() != n {
            return Err(QsdeError::Ito("S and Tim must be square of equal size".to_string()));
        }
        let tol = lit::<T>(1e-9) * (T::one() + max_abs(&s) + max_abs(&tim));
        if max_abs(&(&s - s.transpose())) > tol {
            return Err(QsdeError::Ito("S must be symmetric".to_string()));
        }
        if max_abs(&(&tim + tim.transpose())) > tol {
            return Err(QsdeError::Ito("Tim must be antisymmetric".to_string()));
        }
        let ito = ItoMatrix {
            s: matops::symmetrize(&s),
            tim: (&tim - tim.transpose()) * lit::<T>(0.5),
        };
        if n > 0 {
            let (eig, _) = matops::hermitian_eigen(&ito.f());
            if eig[0] < -tol {
                return Err(QsdeError::Ito(format!(
                    "F is not positive semidefinite (eigenvalue {:.3e})",
                    to_f64(eig[0])
                )));
            }
        }
        Ok(ito)
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn f(&self) -> ComplexMatrix<T> {
        to_complex(&self.s) + self.tim.map(|x| num_complex::Complex::new(T::zero(), x))
    }

    pub fn is_canonical(&self, tol: T) -> bool {
        let n = self.dim();
        n % 2 == 0
            && max_abs(&(&self.s - DMatrix::<T>::identity(n, n))) <= tol
            && max_abs(&(&self.tim - diag_j::<T>(n / 2))) <= tol
    }

    pub fn block_diag(parts: &[&ItoMatrix<T>]) -> ItoMatrix<T> {
        let s: Vec<&RealMatrix<T>> = parts.iter().map(|p| &p.s).collect();
        let t: Vec<&RealMatrix<T>> = parts.iter().map(|p| &p.tim).collect();
        ItoMatrix {
            s: matops::block_diag(&s),
            tim: matops::block_diag(&t),
        }
    }

    /// Ito matrix of the linear combination K·dw: K·F·Kᵀ.
    pub fn transform(&self, k: &RealMatrix<T>) -> ItoMatrix<T> {
        ItoMatrix {
            s: matops::symmetrize(&(k * &self.s * k.transpose())),
            tim: k * &self.tim * k.transpose(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearQsde<T: Real> {
    pub a: RealMatrix<T>,
    pub b: RealMatrix<T>,
    pub c: RealMatrix<T>,
    pub d: RealMatrix<T>,
    pub theta: CommutationMatrix<T>,
    pub ito: ItoMatrix<T>,
    /// First noise column of the window that feeds the output.
    pub output_offset: usize,
}

impl<T: Real> LinearQsde<T> {
    pub fn new(
        a: RealMatrix<T>,
        b: RealMatrix<T>,
        c: RealMatrix<T>,
        d: RealMatrix<T>,
        theta: CommutationMatrix<T>,
        ito: ItoMatrix<T>,
        output_offset: usize,
    ) -> Result<Self, QsdeError> {
        let n = a.nrows();
        let nw = b.ncols();
        let ny = c.nrows();
        let checks = [
            (a.ncols() == n, format!("A is {}x{}", n, a.ncols())),
            (b.nrows() == n, format!("B has {} rows, expected {n}", b.nrows())),
            (c.ncols() == n, format!("C has {} columns, expected {n}", c.ncols())),
            (d.nrows() == ny && d.ncols() == nw, format!("D is {}x{}, expected {ny}x{nw}", d.nrows(), d.ncols())),
            (theta.n() == n, format!("Θ is {0}x{0}, expected {n}x{n}", theta.n())),
            (ito.dim() == nw, format!("Ito matrix has size {}, expected {nw}", ito.dim())),
            (output_offset + ny <= nw, format!("output window {output_offset}..{} exceeds {nw} noise columns", output_offset + ny)),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(QsdeError::Dimension(msg));
            }
        }
        Ok(LinearQsde { a, b, c, d, theta, ito, output_offset })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_w(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_y(&self) -> usize {
        self.c.nrows()
    }

    /// Checks n_y even, n_w even, n_w ≥ n_y and an even output offset.
    pub fn check_conventions(&self) -> Result<(), QsdeError> {
        if self.n_y() % 2 != 0 {
            return Err(QsdeError::Convention(format!("n_y = {} is odd", self.n_y())));
        }
        if self.n_w() % 2 != 0 {
            return Err(QsdeError::Convention(format!("n_w = {} is odd", self.n_w())));
        }
        if self.n_w() < self.n_y() {
            return Err(QsdeError::Convention("n_w < n_y".to_string()));
        }
        if self.output_offset % 2 != 0 {
            return Err(QsdeError::Convention("output window must start on a pair boundary".to_string()));
        }
        Ok(())
    }

    /// Appends zero output rows and zero noise columns until n_y and n_w are
    /// even and n_w ≥ n_y. Added noise columns extend the Ito matrix with a
    /// unit diagonal entry.
    pub fn pad_to_convention(&self) -> LinearQsde<T> {
        let mut out = self.clone();
        if out.n_y() % 2 != 0 {
            out.c = out.c.clone().insert_row(out.n_y(), T::zero());
            out.d = out.d.clone().insert_row(out.d.nrows(), T::zero());
        }
        while out.n_w() < out.n_y() + out.output_offset || out.n_w() % 2 != 0 {
            let k = out.n_w();
            out.b = out.b.clone().insert_column(k, T::zero());
            out.d = out.d.clone().insert_column(k, T::zero());
            out.ito.s = out.ito.s.clone().insert_row(k, T::zero()).insert_column(k, T::zero());
            out.ito.s[(k, k)] = T::one();
            out.ito.tim = out.ito.tim.clone().insert_row(k, T::zero()).insert_column(k, T::zero());
        }
        out
    }

    /// Noise column order that moves the output window to the front.
    pub fn window_first_order(&self) -> Vec<usize> {
        let nw = self.n_w();
        let win = self.output_offset..self.output_offset + self.n_y();
        win.clone().chain((0..nw).filter(|j| !win.contains(j))).collect()
    }
}

/// AΘ + ΘAᵀ + B·Tim·Bᵀ.
pub fn commutation_residual_matrix<T: Real>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    theta: &RealMatrix<T>,
    tim: &RealMatrix<T>,
) -> RealMatrix<T> {
    a * theta + theta * a.transpose() + b * tim * b.transpose()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommutationCheck<T> {
    pub holds: bool,
    pub residual: T,
}

/// Default scale-aware threshold 1e-8·(1 + ‖A‖ + ‖B‖²).
pub fn default_structure_tol<T: Real>(a: &RealMatrix<T>, b: &RealMatrix<T>, tol: &Tolerances<T>) -> T {
    let nb = op_norm(b);
    tol.residual * (T::one() + op_norm(a) + nb * nb)
}

/// Whether the dynamics preserve the commutation relations of Θ.
pub fn preserves_commutation<T: Real>(sys: &LinearQsde<T>, tol: T) -> CommutationCheck<T> {
    let r = commutation_residual_matrix(&sys.a, &sys.b, sys.theta.matrix(), &sys.ito.tim);
    let residual = op_norm(&r);
    CommutationCheck {
        holds: residual <= tol,
        residual,
    }
}

/// Integrates Ċ = AC + CAᵀ + 2·B·Tim·Bᵀ from C(0) = 2Θ with RK4 and returns
/// max_t ‖C(t) − 2Θ‖.
pub fn commutation_ode_oracle<T: Real>(sys: &LinearQsde<T>, horizon: T, steps: usize) -> T {
    let two = lit::<T>(2.0);
    let c0 = sys.theta.matrix() * two;
    let forcing = &sys.b * &sys.ito.tim * sys.b.transpose() * two;
    let a = &sys.a;
    let f = |c: &RealMatrix<T>| a * c + c * a.transpose() + &forcing;
    let h = horizon / lit::<T>(steps.max(1) as f64);
    let half = lit::<T>(0.5);
    let sixth = lit::<T>(1.0 / 6.0);
    let mut c = c0.clone();
    let mut worst = T::zero();
    for _ in 0..steps {
        let k1 = f(&c);
        let k2 = f(&(&c + &k1 * (h * half)));
        let k3 = f(&(&c + &k2 * (h * half)));
        let k4 = f(&(&c + &k3 * h));
        c += (k1 + k2 * two + k3 * two + k4) * (h * sixth);
        worst = worst.max(op_norm(&(&c - &c0)));
    }
    worst
}

/// Step count used by default: max(1000, 100·horizon).
pub fn default_oracle_steps(horizon: f64) -> usize {
    (100.0 * horizon).ceil().max(1000.0) as usize
}
