//! Continuous algebraic Riccati equations, H∞ norms and imaginary-axis
//! rank tests of system pencils.

use crate::matops::{
    cabs,
    self, complex_schur, cplx, eigenvalues, max_abs, op_norm, op_norm_c, sigma_min_c,
    symmetrize, to_complex, MatError,
};
use crate::scalar::{lit, to_f64, Real, Tolerances};
use crate::{ComplexMatrix, RealMatrix};
use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiccatiError {
    #[error("Hamiltonian has an eigenvalue on the imaginary axis ({re:.3e}{im:+.3e}i)")]
    ImaginaryAxisEigenvalue { re: f64, im: f64 },
    #[error("stable invariant subspace extraction failed: {0}")]
    SubspaceExtractionFailure(String),
    #[error("state matrix is not Hurwitz")]
    UnstableA,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// AᵀX + XA + X·Mq·X + Q = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct CareProblem<T: Real> {
    pub a: RealMatrix<T>,
    pub mq: RealMatrix<T>,
    pub q: RealMatrix<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CareMethod {
    OrderedSchur,
    SignFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CareSolution<T: Real> {
    pub x: RealMatrix<T>,
    /// Spectral norm of AᵀX + XA + XMqX + Q.
    pub residual: T,
    /// Eigenvalues of A + Mq·X, sorted by (real, imaginary).
    pub closed_loop_eigs: Vec<Complex<T>>,
    pub stabilizing: bool,
    pub method: CareMethod,
}

impl<T: Real> CareProblem<T> {
    pub fn new(a: RealMatrix<T>, mq: RealMatrix<T>, q: RealMatrix<T>) -> Result<Self, RiccatiError> {
        let n = a.nrows();
        for (name, m) in [("A", &a), ("Mq", &mq), ("Q", &q)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(RiccatiError::Dimension(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(CareProblem { a, mq, q })
    }

    pub fn hamiltonian(&self) -> RealMatrix<T> {
        let n = self.a.nrows();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&self.a);
        h.view_mut((0, n), (n, n)).copy_from(&self.mq);
        h.view_mut((n, 0), (n, n)).copy_from(&(-&self.q));
        h.view_mut((n, n), (n, n)).copy_from(&(-self.a.transpose()));
        h
    }

    pub fn residual_matrix(&self, x: &RealMatrix<T>) -> RealMatrix<T> {
        self.a.transpose() * x + x * &self.a + x * &self.mq * x + &self.q
    }

    /// Scale used to judge residuals: 1 + ‖Q‖ + 2‖A‖‖X‖ + ‖Mq‖‖X‖².
    fn residual_scale(&self, x: &RealMatrix<T>) -> T {
        let nx = op_norm(x);
        let two = lit::<T>(2.0);
        T::one() + op_norm(&self.q) + two * op_norm(&self.a) * nx + op_norm(&self.mq) * nx * nx
    }
}

/// Swaps adjacent diagonal entries k, k+1 of an upper triangular T,
/// updating the unitary factor Q so that Q·T·Q† is unchanged.
fn swap_adjacent<T: Real>(t: &mut ComplexMatrix<T>, q: &mut ComplexMatrix<T>, k: usize) {
    let a = t[(k, k)];
    let b = t[(k, k + 1)];
    let c = t[(k + 1, k + 1)];
    // Eigenvector of c in the 2×2 block is (b, c - a).
    let x1 = b;
    let x2 = c - a;
    let nrm = (x1.norm_sqr() + x2.norm_sqr()).sqrt();
    if nrm == T::zero() {
        return;
    }
    let x1 = x1 / nrm;
    let x2 = x2 / nrm;
    // Z has first column x, second column orthogonal to it.
    let z = DMatrix::from_row_slice(2, 2, &[x1, -x2.conj(), x2, x1.conj()]);
    let zh = z.adjoint();
    let n = t.nrows();
    let rows = zh * t.rows(k, 2);
    t.rows_mut(k, 2).copy_from(&rows);
    let cols = t.columns(k, 2) * &z;
    t.columns_mut(k, 2).copy_from(&cols);
    let qc = q.columns(k, 2) * &z;
    q.columns_mut(k, 2).copy_from(&qc);
    t[(k + 1, k)] = Complex::new(T::zero(), T::zero());
    let _ = n;
}

/// Reorders a complex Schur form so eigenvalues with negative real part lead.
fn order_stable_first<T: Real>(t: &mut ComplexMatrix<T>, q: &mut ComplexMatrix<T>) {
    let n = t.nrows();
    loop {
        let mut swapped = false;
        for k in 0..n.saturating_sub(1) {
            if t[(k, k)].re >= T::zero() && t[(k + 1, k + 1)].re < T::zero() {
                swap_adjacent(t, q, k);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
}

fn x_from_subspace<T: Real>(u1: &ComplexMatrix<T>, u2: &ComplexMatrix<T>) -> Option<RealMatrix<T>> {
    let n = u1.nrows();
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let smin = sigma_min_c(u1);
    if smin <= lit::<T>(1e3) * T::default_epsilon() {
        return None;
    }
    // X·U1 = U2  ⇔  U1ᵀ·Xᵀ = U2ᵀ.
    let xt = u1.transpose().lu().solve(&u2.transpose())?;
    Some(symmetrize(&matops::re_part(&xt.transpose())))
}

fn schur_solution<T: Real>(h: &RealMatrix<T>) -> Result<Option<RealMatrix<T>>, RiccatiError> {
    let n = h.nrows() / 2;
    let (mut q, mut t) = complex_schur(&to_complex(h))?;
    order_stable_first(&mut t, &mut q);
    let stable = (0..2 * n).filter(|&i| t[(i, i)].re < T::zero()).count();
    if stable != n {
        return Ok(None);
    }
    let u1 = q.view((0, 0), (n, n)).into_owned();
    let u2 = q.view((n, 0), (n, n)).into_owned();
    Ok(x_from_subspace(&u1, &u2))
}

fn sign_function_solution<T: Real>(h: &RealMatrix<T>) -> Option<RealMatrix<T>> {
    let n2 = h.nrows();
    let n = n2 / 2;
    let mut z = h.clone();
    let half = lit::<T>(0.5);
    for _ in 0..100 {
        let lu = z.clone().lu();
        let u = lu.u();
        let mut logdet = T::zero();
        for i in 0..n2 {
            let d = u[(i, i)].abs();
            if d == T::zero() {
                return None;
            }
            logdet += d.ln();
        }
        let c = (-logdet / lit::<T>(n2 as f64)).exp();
        let zinv = lu.try_inverse()?;
        let next = (&z * c + zinv * (T::one() / c)) * half;
        let diff = max_abs(&(&next - &z));
        let scale = max_abs(&next);
        z = next;
        if diff <= lit::<T>(1e2) * T::default_epsilon() * scale.max(T::one()) {
            break;
        }
    }
    let id = DMatrix::<T>::identity(n, n);
    let w11 = z.view((0, 0), (n, n)).into_owned();
    let w12 = z.view((0, n), (n, n)).into_owned();
    let w21 = z.view((n, 0), (n, n)).into_owned();
    let w22 = z.view((n, n), (n, n)).into_owned();
    let lhs = matops::vstack(&[&w12, &(w22 + &id)]);
    let rhs = -matops::vstack(&[&(w11 + &id), &w21]);
    let svd = lhs.svd(true, true);
    let x = svd.solve(&rhs, lit::<T>(1e-13)).ok()?;
    Some(symmetrize(&x))
}

/// One Newton–Kleinman refinement step; returns None if it does not help.
fn refine<T: Real>(p: &CareProblem<T>, x: &RealMatrix<T>) -> Option<RealMatrix<T>> {
    let res = p.residual_matrix(x);
    let ac = &p.a + &p.mq * x;
    let delta = matops::solve_lyapunov(&ac, &res).ok()?;
    let xn = symmetrize(&(x + delta));
    if op_norm(&p.residual_matrix(&xn)) < op_norm(&res) {
        Some(xn)
    } else {
        None
    }
}

fn finish<T: Real>(p: &CareProblem<T>, mut x: RealMatrix<T>, method: CareMethod) -> Result<CareSolution<T>, RiccatiError> {
    for _ in 0..3 {
        if op_norm(&p.residual_matrix(&x)) <= T::default_epsilon() * p.residual_scale(&x) {
            break;
        }
        match refine(p, &x) {
            Some(xn) => x = xn,
            None => break,
        }
    }
    let residual = op_norm(&p.residual_matrix(&x));
    let closed_loop_eigs = eigenvalues(&(&p.a + &p.mq * &x))?;
    let stabilizing = closed_loop_eigs.iter().all(|z| z.re < T::zero());
    Ok(CareSolution {
        x,
        residual,
        closed_loop_eigs,
        stabilizing,
        method,
    })
}

/// Stabilizing solution of AᵀX + XA + X·Mq·X + Q = 0.
///
/// The stable invariant subspace of the Hamiltonian is taken from an
/// ordered complex Schur form; the matrix sign function is the fallback.
pub fn solve_care<T: Real>(p: &CareProblem<T>, tol: &Tolerances<T>) -> Result<CareSolution<T>, RiccatiError> {
    let n = p.a.nrows();
    let p = CareProblem::new(p.a.clone(), symmetrize(&p.mq), symmetrize(&p.q))?;
    if n == 0 {
        return finish(&p, DMatrix::zeros(0, 0), CareMethod::OrderedSchur);
    }
    let h = p.hamiltonian();
    let eig = eigenvalues(&h)?;
    if let Some(z) = eig.iter().find(|z| z.re.abs() <= tol.axis) {
        return Err(RiccatiError::ImaginaryAxisEigenvalue {
            re: to_f64(z.re),
            im: to_f64(z.im),
        });
    }
    let accept = |s: &CareSolution<T>| {
        s.stabilizing && s.residual <= tol.residual * p.residual_scale(&s.x)
    };
    let mut best: Option<CareSolution<T>> = None;
    if let Some(x) = schur_solution(&h)? {
        let s = finish(&p, x, CareMethod::OrderedSchur)?;
        if accept(&s) {
            return Ok(s);
        }
        best = Some(s);
    }
    if let Some(x) = sign_function_solution(&h) {
        let s = finish(&p, x, CareMethod::SignFunction)?;
        if accept(&s) {
            return Ok(s);
        }
        if best.as_ref().is_none_or(|b| s.residual < b.residual) {
            best = Some(s);
        }
    }
    Err(RiccatiError::SubspaceExtractionFailure(match best {
        Some(b) => format!(
            "best candidate residual {:.3e}, stabilizing={}",
            to_f64(b.residual),
            b.stabilizing
        ),
        None => "invariant subspace basis is singular".to_string(),
    }))
}

fn transfer_at<T: Real>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    c: &RealMatrix<T>,
    d: &RealMatrix<T>,
    omega: T,
) -> Option<ComplexMatrix<T>> {
    let n = a.nrows();
    let mut m = to_complex(&(-a));
    for i in 0..n {
        m[(i, i)] += cplx(T::zero(), omega);
    }
    let x = m.lu().solve(&to_complex(b))?;
    Some(to_complex(c) * x + to_complex(d))
}

/// Largest singular value of C(iωI − A)⁻¹B + D.
pub fn sigma_max_at<T: Real>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    c: &RealMatrix<T>,
    d: &RealMatrix<T>,
    omega: T,
) -> T {
    match transfer_at(a, b, c, d, omega) {
        Some(g) => op_norm_c(&g),
        None => lit::<T>(f64::INFINITY),
    }
}

/// Frequencies ω ≥ 0 where the γ-Hamiltonian has imaginary-axis
/// eigenvalues; empty means ‖G‖∞ < γ.
fn axis_crossings<T: Real>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    c: &RealMatrix<T>,
    d: &RealMatrix<T>,
    gamma: T,
    axis_tol: T,
) -> Result<Vec<T>, RiccatiError> {
    let n = a.nrows();
    let m = b.ncols();
    let p = c.nrows();
    // Normalize to ‖G/γ‖ < 1 with B and C each scaled by 1/√γ.
    let s = gamma.sqrt();
    let bh = b / s;
    let ch = c / s;
    let dh = d / gamma;
    let r = DMatrix::<T>::identity(m, m) - dh.transpose() * &dh;
    let rinv = r.try_inverse().ok_or_else(|| {
        RiccatiError::Dimension("γ below feedthrough norm".to_string())
    })?;
    let a0 = a + &bh * &rinv * dh.transpose() * &ch;
    let top = &bh * &rinv * bh.transpose();
    let bot = -(ch.transpose()
        * (DMatrix::<T>::identity(p, p) + &dh * &rinv * dh.transpose())
        * &ch);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a0);
    h.view_mut((0, n), (n, n)).copy_from(&top);
    h.view_mut((n, 0), (n, n)).copy_from(&bot);
    h.view_mut((n, n), (n, n)).copy_from(&(-a0.transpose()));
    let mut w: Vec<T> = eigenvalues(&h)?
        .into_iter()
        .filter(|z| z.re.abs() <= axis_tol * (T::one() + cabs(*z)))
        .map(|z| z.im.abs())
        .collect();
    w.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(w)
}

/// H∞ norm of C(sI − A)⁻¹B + D to absolute accuracy `tol`.
///
/// Bisects on γ with the imaginary-axis eigenvalue test of the
/// γ-Hamiltonian; axis crossings also tighten the lower bound.
pub fn hinf_norm<T: Real>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    c: &RealMatrix<T>,
    d: &RealMatrix<T>,
    tol: T,
) -> Result<T, RiccatiError> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
        return Err(RiccatiError::Dimension("inconsistent (A, B, C, D)".to_string()));
    }
    let d_norm = op_norm(d);
    if n == 0 || b.ncols() == 0 || c.nrows() == 0 {
        return Ok(d_norm);
    }
    let eig = eigenvalues(a)?;
    if eig.iter().any(|z| z.re >= T::zero()) {
        return Err(RiccatiError::UnstableA);
    }
    let axis_tol = lit::<T>(1e-9);
    let mut lo = d_norm.max(sigma_max_at(a, b, c, d, T::zero()));
    for z in &eig {
        lo = lo.max(sigma_max_at(a, b, c, d, cabs(*z)));
        lo = lo.max(sigma_max_at(a, b, c, d, z.im.abs()));
    }
    let raise = |lo: T, w: &[T]| -> T {
        let mut best = lo;
        for (i, &wi) in w.iter().enumerate() {
            best = best.max(sigma_max_at(a, b, c, d, wi));
            if let Some(&wj) = w.get(i + 1) {
                best = best.max(sigma_max_at(a, b, c, d, (wi + wj) * lit::<T>(0.5)));
            }
        }
        best
    };
    let two = lit::<T>(2.0);
    let mut hi = lo * two + tol;
    let mut guard = 0;
    loop {
        let w = axis_crossings(a, b, c, d, hi, axis_tol)?;
        if w.is_empty() {
            break;
        }
        lo = raise(lo.max(hi), &w);
        hi = lo * two + tol;
        guard += 1;
        if guard > 200 {
            return Err(RiccatiError::SubspaceExtractionFailure(
                "no finite upper bound for the H∞ norm".to_string(),
            ));
        }
    }
    let half = lit::<T>(0.5);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = (lo + hi) * half;
        let w = axis_crossings(a, b, c, d, mid, axis_tol)?;
        if w.is_empty() {
            hi = mid;
        } else {
            lo = raise(mid, &w).min(hi);
        }
    }
    Ok((lo + hi) * half)
}

/// Which rank of the pencil [[A − sI, B], [C, D]] must be full.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankSide {
    Column,
    Row,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PencilRank {
    pub full_rank: bool,
    pub diagnostic: Option<String>,
}

fn pencil_at<T: Real>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    c: &RealMatrix<T>,
    d: &RealMatrix<T>,
    s: Complex<T>,
) -> ComplexMatrix<T> {
    let n = a.nrows();
    let top = matops::hstack(&[&to_complex(a), &to_complex(b)]);
    let bottom = matops::hstack(&[&to_complex(c), &to_complex(d)]);
    let mut p = matops::vstack(&[&top, &bottom]);
    for i in 0..n {
        p[(i, i)] -= s;
    }
    p
}

/// Full column (or row) rank of the system pencil at every s = iω.
///
/// Invariant zeros are computed as finite generalized eigenvalues of the
/// (squared-down) pencil; candidates near the axis are confirmed by the
/// smallest singular value of the original pencil.
pub fn pencil_full_rank_on_axis<T: Real>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    c: &RealMatrix<T>,
    d: &RealMatrix<T>,
    side: RankSide,
    rank_tol: T,
) -> Result<PencilRank, RiccatiError> {
    let (a, b, c, d) = match side {
        RankSide::Column => (a.clone(), b.clone(), c.clone(), d.clone()),
        RankSide::Row => (a.transpose(), c.transpose(), b.transpose(), d.transpose()),
    };
    let n = a.nrows();
    let m = b.ncols();
    let p = c.nrows();
    if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.nrows() != p || d.ncols() != m {
        return Err(RiccatiError::Dimension("inconsistent pencil blocks".to_string()));
    }
    if p < m {
        return Ok(PencilRank {
            full_rank: false,
            diagnostic: Some(format!("pencil has {} rows but {} columns", n + p, n + m)),
        });
    }
    let scale = T::one() + max_abs(&a) + max_abs(&b) + max_abs(&c) + max_abs(&d);
    let thresh = rank_tol * scale;
    let probe = cplx(lit::<T>(0.3719), lit::<T>(1.1173)) * scale;
    if sigma_min_c(&pencil_at(&a, &b, &c, &d, probe)) <= thresh {
        return Ok(PencilRank {
            full_rank: false,
            diagnostic: Some("pencil is rank deficient at every s".to_string()),
        });
    }
    // Square down the output rows with a fixed pseudo-random combination.
    let (cw, dw) = if p > m {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let w = DMatrix::<T>::from_fn(m, p, |_, _| lit::<T>(rng.gen_range(-1.0..1.0)));
        (&w * &c, &w * &d)
    } else {
        (c.clone(), d.clone())
    };
    let big_m = matops::vstack(&[
        &matops::hstack(&[&a, &b]),
        &matops::hstack(&[&cw, &dw]),
    ]);
    let mut big_n = DMatrix::<T>::zeros(n + m, n + m);
    for i in 0..n {
        big_n[(i, i)] = T::one();
    }
    let shifts = [0.5731, -1.3377, 2.7183];
    let mut k = None;
    for s in shifts {
        let sigma = lit::<T>(s) * scale;
        let shifted = &big_m - &big_n * sigma;
        if let Some(inv) = shifted.try_inverse() {
            if max_abs(&inv) * thresh < T::one() {
                k = Some((sigma, inv * &big_n));
                break;
            }
        }
    }
    let Some((sigma, k)) = k else {
        return Ok(PencilRank {
            full_rank: false,
            diagnostic: Some("squared-down pencil is singular".to_string()),
        });
    };
    let knorm = max_abs(&k).max(T::default_epsilon());
    for mu in eigenvalues(&k)? {
        if cabs(mu) <= lit::<T>(1e-10) * knorm {
            continue;
        }
        let lambda = Complex::new(sigma, T::zero()) + Complex::new(T::one(), T::zero()) / mu;
        if lambda.re.abs() <= lit::<T>(1e-6) * (T::one() + cabs(lambda)) {
            let s = cplx(T::zero(), lambda.im);
            let smin = sigma_min_c(&pencil_at(&a, &b, &c, &d, s));
            if smin <= lit::<T>(1e-6).max(thresh) * scale {
                return Ok(PencilRank {
                    full_rank: false,
                    diagnostic: Some(format!(
                        "invariant zero on the imaginary axis at ω = {:.6e}",
                        to_f64(lambda.im.abs())
                    )),
                });
            }
        }
    }
    Ok(PencilRank {
        full_rank: true,
        diagnostic: None,
    })
}
