//! Two-Riccati H∞ synthesis for linear quantum plants: the plant model,
//! the standing assumptions, the controller formulas, closed-loop assembly
//! and the strict bounded-real certificate of the result.

use crate::dissipativity::{
    compute_lambda0, strict_bounded_real_check, strict_lmi_witness, DissipationCertificate,
    SbrFailure,
};
use crate::matops::{self, hstack, symmetric_eigen, vstack, MatError};
use crate::qsde::{canonical_ito, CommutationMatrix, ItoMatrix, LinearQsde, QsdeError};
use crate::realization::FullController;
use crate::riccati::{
    pencil_full_rank_on_axis, solve_care, CareProblem, CareSolution, PencilRank, RankSide,
    RiccatiError,
};
use crate::scalar::{to_f64, Real, Tolerances};
use crate::RealMatrix;
use nalgebra::DMatrix;
use thiserror::Error;

/// dx = Ax dt + B0 dv + B1 dw + B2 du,
/// dz = C1x dt + D12 du,
/// dy = C2x dt + D20 dv + D21 dw.
#[derive(Clone, Debug, PartialEq)]
pub struct Plant<T: Real> {
    pub a: RealMatrix<T>,
    pub b0: RealMatrix<T>,
    pub b1: RealMatrix<T>,
    pub b2: RealMatrix<T>,
    pub c1: RealMatrix<T>,
    pub d12: RealMatrix<T>,
    pub c2: RealMatrix<T>,
    pub d20: RealMatrix<T>,
    pub d21: RealMatrix<T>,
    pub f_v: ItoMatrix<T>,
    pub f_w: ItoMatrix<T>,
    pub theta: CommutationMatrix<T>,
}

impl<T: Real> Plant<T> {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_v(&self) -> usize {
        self.b0.ncols()
    }
    pub fn n_w(&self) -> usize {
        self.b1.ncols()
    }
    pub fn n_u(&self) -> usize {
        self.b2.ncols()
    }
    pub fn n_z(&self) -> usize {
        self.c1.nrows()
    }
    pub fn n_y(&self) -> usize {
        self.c2.nrows()
    }

    pub fn validate(&self) -> Result<(), SynthesisError> {
        let n = self.n();
        let (nv, nw, nu, nz, ny) = (self.n_v(), self.n_w(), self.n_u(), self.n_z(), self.n_y());
        let expect: [(&str, &RealMatrix<T>, usize, usize); 9] = [
            ("A", &self.a, n, n),
            ("B0", &self.b0, n, nv),
            ("B1", &self.b1, n, nw),
            ("B2", &self.b2, n, nu),
            ("C1", &self.c1, nz, n),
            ("D12", &self.d12, nz, nu),
            ("C2", &self.c2, ny, n),
            ("D20", &self.d20, ny, nv),
            ("D21", &self.d21, ny, nw),
        ];
        for (name, m, r, c) in expect {
            if m.nrows() != r || m.ncols() != c {
                return Err(SynthesisError::InvalidPlant(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if self.f_v.dim() != nv || self.f_w.dim() != nw {
            return Err(SynthesisError::InvalidPlant(
                "Ito matrices do not match the noise dimensions".to_string(),
            ));
        }
        if self.theta.n() != n {
            return Err(SynthesisError::InvalidPlant(format!(
                "commutation matrix is {0}x{0}, expected {n}x{n}",
                self.theta.n()
            )));
        }
        Ok(())
    }

    pub fn e1(&self) -> RealMatrix<T> {
        self.d12.transpose() * &self.d12
    }

    pub fn e2(&self) -> RealMatrix<T> {
        &self.d21 * self.d21.transpose()
    }

    /// The plant as a QSDE driven by (v, w, u) with output y; the output
    /// window starts at the w columns.
    pub fn as_qsde(&self) -> Result<LinearQsde<T>, SynthesisError> {
        self.validate()?;
        let nu = self.n_u();
        let f_u = if nu % 2 == 0 {
            canonical_ito(nu)?
        } else {
            ItoMatrix::from_parts(DMatrix::identity(nu, nu), DMatrix::zeros(nu, nu))?
        };
        let sys = LinearQsde::new(
            self.a.clone(),
            hstack(&[&self.b0, &self.b1, &self.b2]),
            self.c2.clone(),
            hstack(&[&self.d20, &self.d21, &DMatrix::zeros(self.n_y(), nu)]),
            self.theta.clone(),
            ItoMatrix::block_diag(&[&self.f_v, &self.f_w, &f_u]),
            self.n_v(),
        )?;
        Ok(sys)
    }
}

/// dξ = A_K ξ dt + B_K dy, du = C_K ξ dt + (noise terms of the realization).
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerTriple<T: Real> {
    pub a_k: RealMatrix<T>,
    pub b_k: RealMatrix<T>,
    pub c_k: RealMatrix<T>,
}

impl<T: Real> ControllerTriple<T> {
    pub fn n_k(&self) -> usize {
        self.a_k.nrows()
    }
    pub fn n_y(&self) -> usize {
        self.b_k.ncols()
    }
    pub fn n_u(&self) -> usize {
        self.c_k.nrows()
    }

    /// Appends zero columns to B_K and zero rows to C_K so that both the
    /// measurement and control dimensions are even.
    pub fn padded(&self) -> ControllerTriple<T> {
        let ny = self.n_y() + self.n_y() % 2;
        let nu = self.n_u() + self.n_u() % 2;
        let mut b_k = DMatrix::zeros(self.n_k(), ny);
        b_k.columns_mut(0, self.n_y()).copy_from(&self.b_k);
        let mut c_k = DMatrix::zeros(nu, self.n_k());
        c_k.rows_mut(0, self.n_u()).copy_from(&self.c_k);
        ControllerTriple {
            a_k: self.a_k.clone(),
            b_k,
            c_k,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    RiccatiX,
    RiccatiY,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::RiccatiX => "riccati_x",
            Stage::RiccatiY => "riccati_y",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("invalid plant: {0}")]
    InvalidPlant(String),
    #[error("assumption A1({condition}) violated: {detail}")]
    AssumptionA1Violated { condition: u8, detail: String },
    #[error("attenuation g too small: {stage} Hamiltonian has an imaginary-axis eigenvalue")]
    GTooSmall { stage: Stage },
    #[error("{stage} solution is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NegativeSolution { stage: Stage, min_eig: f64 },
    #[error("spectral radius of XY is {rho:.6}, must be below 1")]
    SpectralRadiusGeOne { rho: f64 },
    #[error("I − YX is singular")]
    SingularIMinusYX,
    #[error("closed loop is not strictly bounded real: {}", reason.as_str())]
    CertificateFailed { reason: SbrFailure },
    #[error("{stage}: {source}")]
    Riccati { stage: Stage, source: RiccatiError },
    #[error(transparent)]
    Qsde(#[from] QsdeError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

impl SynthesisError {
    /// Stable machine-readable failure code.
    pub fn code(&self) -> &'static str {
        match self {
            SynthesisError::InvalidPlant(_) => "invalid_plant",
            SynthesisError::AssumptionA1Violated { .. } => "assumption_a1_violated",
            SynthesisError::GTooSmall { .. } => "g_too_small",
            SynthesisError::NegativeSolution { .. } => "negative_solution",
            SynthesisError::SpectralRadiusGeOne { .. } => "spectral_radius_ge_one",
            SynthesisError::SingularIMinusYX => "singular_i_minus_yx",
            SynthesisError::CertificateFailed { .. } => "certificate_failed",
            SynthesisError::Riccati { .. } => "riccati_failure",
            SynthesisError::Qsde(_) => "invalid_system",
            SynthesisError::Mat(_) => "numerical_failure",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionA1Report {
    pub e1_positive: bool,
    pub e2_positive: bool,
    pub control_pencil: PencilRank,
    pub measurement_pencil: PencilRank,
}

impl AssumptionA1Report {
    pub fn holds(&self) -> bool {
        self.first_failure().is_none()
    }

    /// Index (1–4) of the first failing condition.
    pub fn first_failure(&self) -> Option<u8> {
        [
            self.e1_positive,
            self.e2_positive,
            self.control_pencil.full_rank,
            self.measurement_pencil.full_rank,
        ]
        .iter()
        .position(|ok| !ok)
        .map(|i| i as u8 + 1)
    }
}

pub fn check_assumption_a1<T: Real>(plant: &Plant<T>, tol: &Tolerances<T>) -> AssumptionA1Report {
    let pd = |m: &RealMatrix<T>| {
        m.nrows() > 0
            && matops::classify_definiteness_real(m, tol.structural)
                .map(|k| k.is_pd())
                .unwrap_or(false)
    };
    let pencil = |b: &RealMatrix<T>, c: &RealMatrix<T>, d: &RealMatrix<T>, side| {
        pencil_full_rank_on_axis(&plant.a, b, c, d, side, tol.rank).unwrap_or_else(|e| PencilRank {
            full_rank: false,
            diagnostic: Some(e.to_string()),
        })
    };
    AssumptionA1Report {
        e1_positive: pd(&plant.e1()),
        e2_positive: pd(&plant.e2()),
        control_pencil: pencil(&plant.b2, &plant.c1, &plant.d12, RankSide::Column),
        measurement_pencil: pencil(&plant.b1, &plant.c2, &plant.d21, RankSide::Row),
    }
}

fn inverse<T: Real>(m: &RealMatrix<T>, condition: u8) -> Result<RealMatrix<T>, SynthesisError> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| SynthesisError::AssumptionA1Violated {
            condition,
            detail: "matrix is singular".to_string(),
        })
}

fn riccati_error(stage: Stage, e: RiccatiError) -> SynthesisError {
    match e {
        RiccatiError::ImaginaryAxisEigenvalue { .. } => SynthesisError::GTooSmall { stage },
        source => SynthesisError::Riccati { stage, source },
    }
}

fn require_psd<T: Real>(
    sol: CareSolution<T>,
    stage: Stage,
    tol: &Tolerances<T>,
) -> Result<CareSolution<T>, SynthesisError> {
    let (eig, _) = symmetric_eigen(&sol.x);
    if let Some(&lo) = eig.first() {
        if lo < -tol.structural * (T::one() + matops::op_norm(&sol.x)) {
            return Err(SynthesisError::NegativeSolution {
                stage,
                min_eig: to_f64(lo),
            });
        }
    }
    Ok(sol)
}

/// Riccati problem for X: drift A − B2E1⁻¹D12ᵀC1, quadratic
/// B1B1ᵀ − g²B2E1⁻¹B2ᵀ, constant g⁻²C1ᵀ(I − D12E1⁻¹D12ᵀ)C1.
pub fn riccati_x_problem<T: Real>(plant: &Plant<T>, g: T) -> Result<CareProblem<T>, SynthesisError> {
    let e1i = inverse(&plant.e1(), 1)?;
    let nz = plant.n_z();
    let drift = &plant.a - &plant.b2 * &e1i * plant.d12.transpose() * &plant.c1;
    let mq = &plant.b1 * plant.b1.transpose() - &plant.b2 * &e1i * plant.b2.transpose() * (g * g);
    let proj = DMatrix::<T>::identity(nz, nz) - &plant.d12 * &e1i * plant.d12.transpose();
    let q = plant.c1.transpose() * proj * &plant.c1 / (g * g);
    CareProblem::new(drift, mq, q).map_err(|e| riccati_error(Stage::RiccatiX, e))
}

/// Riccati problem for Y, posed for the transposed drift:
/// (A − B1D21ᵀE2⁻¹C2)Y + Y(·)ᵀ + Y(g⁻²C1ᵀC1 − C2ᵀE2⁻¹C2)Y + B1(I − D21ᵀE2⁻¹D21)B1ᵀ = 0.
pub fn riccati_y_problem<T: Real>(plant: &Plant<T>, g: T) -> Result<CareProblem<T>, SynthesisError> {
    let e2i = inverse(&plant.e2(), 2)?;
    let nw = plant.n_w();
    let drift = &plant.a - &plant.b1 * plant.d21.transpose() * &e2i * &plant.c2;
    let mq = plant.c1.transpose() * &plant.c1 / (g * g) - plant.c2.transpose() * &e2i * &plant.c2;
    let proj = DMatrix::<T>::identity(nw, nw) - plant.d21.transpose() * &e2i * &plant.d21;
    let q = &plant.b1 * proj * plant.b1.transpose();
    CareProblem::new(drift.transpose(), mq, q).map_err(|e| riccati_error(Stage::RiccatiY, e))
}

pub fn solve_riccati_x<T: Real>(
    plant: &Plant<T>,
    g: T,
    tol: &Tolerances<T>,
) -> Result<CareSolution<T>, SynthesisError> {
    let p = riccati_x_problem(plant, g)?;
    let sol = solve_care(&p, tol).map_err(|e| riccati_error(Stage::RiccatiX, e))?;
    require_psd(sol, Stage::RiccatiX, tol)
}

pub fn solve_riccati_y<T: Real>(
    plant: &Plant<T>,
    g: T,
    tol: &Tolerances<T>,
) -> Result<CareSolution<T>, SynthesisError> {
    let p = riccati_y_problem(plant, g)?;
    let sol = solve_care(&p, tol).map_err(|e| riccati_error(Stage::RiccatiY, e))?;
    require_psd(sol, Stage::RiccatiY, tol)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssumptionA2Report<T> {
    pub x_stabilizing: bool,
    pub y_stabilizing: bool,
    pub spectral_radius: T,
}

impl<T: Real> AssumptionA2Report<T> {
    pub fn holds(&self) -> bool {
        self.x_stabilizing && self.y_stabilizing && self.spectral_radius < T::one()
    }
}

pub fn check_assumption_a2<T: Real>(
    plant: &Plant<T>,
    g: T,
    x: &RealMatrix<T>,
    y: &RealMatrix<T>,
) -> Result<AssumptionA2Report<T>, SynthesisError> {
    let px = riccati_x_problem(plant, g)?;
    let py = riccati_y_problem(plant, g)?;
    let stab = |p: &CareProblem<T>, s: &RealMatrix<T>| -> Result<bool, SynthesisError> {
        Ok(matops::spectral_abscissa(&(&p.a + &p.mq * s))? < T::zero())
    };
    Ok(AssumptionA2Report {
        x_stabilizing: stab(&px, x)?,
        y_stabilizing: stab(&py, y)?,
        spectral_radius: matops::spectral_radius(&(x * y))?,
    })
}

/// C_K = −E1⁻¹(g²B2ᵀX + D12ᵀC1),
/// B_K = (I − YX)⁻¹(YC2ᵀ + B1D21ᵀ)E2⁻¹,
/// A_K = A + B2C_K − B_KC2 + (B1 − B_KD21)B1ᵀX.
pub fn controller_triple<T: Real>(
    plant: &Plant<T>,
    g: T,
    x: &RealMatrix<T>,
    y: &RealMatrix<T>,
) -> Result<ControllerTriple<T>, SynthesisError> {
    let n = plant.n();
    let e1i = inverse(&plant.e1(), 1)?;
    let e2i = inverse(&plant.e2(), 2)?;
    let c_k = -(&e1i * (plant.b2.transpose() * x * (g * g) + plant.d12.transpose() * &plant.c1));
    let iyx = DMatrix::<T>::identity(n, n) - y * x;
    let iyx_inv = iyx.try_inverse().ok_or(SynthesisError::SingularIMinusYX)?;
    let b_k = iyx_inv * (y * plant.c2.transpose() + &plant.b1 * plant.d21.transpose()) * e2i;
    let a_k = &plant.a + &plant.b2 * &c_k - &b_k * &plant.c2
        + (&plant.b1 - &b_k * &plant.d21) * plant.b1.transpose() * x;
    Ok(ControllerTriple { a_k, b_k, c_k })
}

/// Closed loop in η = (x, ξ):
/// dη = Ãη dt + B̃ dw + G̃ dṽ, dz = C̃η dt + H̃ dṽ, with ṽ = (v, v_K).
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoop<T: Real> {
    pub atil: RealMatrix<T>,
    pub btil: RealMatrix<T>,
    pub gtil: RealMatrix<T>,
    pub ctil: RealMatrix<T>,
    pub htil: RealMatrix<T>,
    /// Ito matrix of (w, v, v_K).
    pub f_combined: ItoMatrix<T>,
    pub n_plant: usize,
}

impl<T: Real> ClosedLoop<T> {
    pub fn n(&self) -> usize {
        self.atil.nrows()
    }

    /// [B̃ G̃], the full noise input matching `f_combined`.
    pub fn noise_input(&self) -> RealMatrix<T> {
        hstack(&[&self.btil, &self.gtil])
    }

    /// λ₀ of a storage matrix X for this loop.
    pub fn lambda0(&self, x: &RealMatrix<T>) -> Result<T, SynthesisError> {
        compute_lambda0(x, &self.btil, &self.gtil, &self.f_combined)
            .map_err(|e| SynthesisError::Mat(MatError::Dimension(e.to_string())))
    }
}

fn assemble<T: Real>(
    plant: &Plant<T>,
    triple: &ControllerTriple<T>,
    b_k0: &RealMatrix<T>,
    b_k1: &RealMatrix<T>,
    f_vk: &ItoMatrix<T>,
) -> Result<ClosedLoop<T>, SynthesisError> {
    plant.validate()?;
    let (n, ny, nu) = (plant.n(), plant.n_y(), plant.n_u());
    let nk = triple.n_k();
    if triple.b_k.nrows() != nk
        || triple.c_k.ncols() != nk
        || triple.n_y() < ny
        || triple.n_u() < nu
        || b_k0.nrows() < nu
        || b_k1.nrows() != nk
        || b_k0.ncols() != b_k1.ncols()
        || f_vk.dim() != b_k1.ncols()
    {
        return Err(SynthesisError::InvalidPlant(format!(
            "controller (n_K={nk}, n_y={}, n_u={}) does not fit plant (n_y={ny}, n_u={nu})",
            triple.n_y(),
            triple.n_u()
        )));
    }
    let b_k = triple.b_k.columns(0, ny).into_owned();
    let c_k = triple.c_k.rows(0, nu).into_owned();
    let b_k0 = b_k0.rows(0, nu).into_owned();
    let atil = vstack(&[
        &hstack(&[&plant.a, &(&plant.b2 * &c_k)]),
        &hstack(&[&(&b_k * &plant.c2), &triple.a_k]),
    ]);
    let btil = vstack(&[&plant.b1, &(&b_k * &plant.d21)]);
    let gtil = vstack(&[
        &hstack(&[&plant.b0, &(&plant.b2 * &b_k0)]),
        &hstack(&[&(&b_k * &plant.d20), b_k1]),
    ]);
    let ctil = hstack(&[&plant.c1, &(&plant.d12 * &c_k)]);
    let htil = hstack(&[&DMatrix::zeros(plant.n_z(), plant.n_v()), &(&plant.d12 * &b_k0)]);
    Ok(ClosedLoop {
        atil,
        btil,
        gtil,
        ctil,
        htil,
        f_combined: ItoMatrix::block_diag(&[&plant.f_w, &plant.f_v, f_vk]),
        n_plant: n,
    })
}

/// Closed loop with a physically realized controller. Padding columns of
/// B_K and rows of C_K/B_K0 beyond the plant's n_y and n_u are dropped.
pub fn close_loop<T: Real>(
    plant: &Plant<T>,
    ctrl: &FullController<T>,
) -> Result<ClosedLoop<T>, SynthesisError> {
    assemble(plant, &ctrl.triple, &ctrl.b_k0, &ctrl.b_k1, &ctrl.f_vk)
}

/// Closed loop with the bare triple and no controller noise.
pub fn close_loop_triple<T: Real>(
    plant: &Plant<T>,
    triple: &ControllerTriple<T>,
) -> Result<ClosedLoop<T>, SynthesisError> {
    let nk = triple.n_k();
    let empty = ItoMatrix {
        s: DMatrix::zeros(0, 0),
        tim: DMatrix::zeros(0, 0),
    };
    assemble(plant, triple, &DMatrix::zeros(plant.n_u(), 0), &DMatrix::zeros(nk, 0), &empty)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisResult<T: Real> {
    pub g: T,
    pub x: CareSolution<T>,
    pub y: CareSolution<T>,
    pub triple: ControllerTriple<T>,
    pub a1: AssumptionA1Report,
    pub a2: AssumptionA2Report<T>,
    /// Certificate for the (w → z) loop without controller noise.
    pub certificate: DissipationCertificate<T>,
    /// Stabilizing bounded-real Riccati solution of that loop.
    pub bounded_real_x: RealMatrix<T>,
}

/// The full pipeline: A1, both Riccati equations, A2, the controller
/// triple, and the strict bounded-real certificate of the (w → z) loop.
pub fn synthesize<T: Real>(
    plant: &Plant<T>,
    g: T,
    tol: &Tolerances<T>,
) -> Result<SynthesisResult<T>, SynthesisError> {
    plant.validate()?;
    if g <= T::zero() {
        return Err(SynthesisError::InvalidPlant("g must be positive".to_string()));
    }
    let a1 = check_assumption_a1(plant, tol);
    if let Some(condition) = a1.first_failure() {
        let detail = match condition {
            1 => "D12ᵀD12 is not positive definite".to_string(),
            2 => "D21D21ᵀ is not positive definite".to_string(),
            3 => a1.control_pencil.diagnostic.clone().unwrap_or_else(|| "control pencil loses column rank on the imaginary axis".to_string()),
            _ => a1.measurement_pencil.diagnostic.clone().unwrap_or_else(|| "measurement pencil loses row rank on the imaginary axis".to_string()),
        };
        return Err(SynthesisError::AssumptionA1Violated { condition, detail });
    }
    let xs = solve_riccati_x(plant, g, tol)?;
    let ys = solve_riccati_y(plant, g, tol)?;
    let a2 = check_assumption_a2(plant, g, &xs.x, &ys.x)?;
    if a2.spectral_radius >= T::one() {
        return Err(SynthesisError::SpectralRadiusGeOne {
            rho: to_f64(a2.spectral_radius),
        });
    }
    let triple = controller_triple(plant, g, &xs.x, &ys.x)?;
    let cl = close_loop_triple(plant, &triple)?;
    let d0 = DMatrix::zeros(cl.ctil.nrows(), cl.btil.ncols());
    let sbr = strict_bounded_real_check(&cl.atil, &cl.btil, &cl.ctil, &d0, g, tol);
    let bounded_real_x = match (sbr.holds, sbr.x) {
        (true, Some(x)) => x,
        _ => {
            return Err(SynthesisError::CertificateFailed {
                reason: sbr.reason.unwrap_or(SbrFailure::NoStabilizingSolution),
            })
        }
    };
    let certificate = match strict_lmi_witness(&cl.atil, &cl.btil, &cl.ctil, &d0, g, tol) {
        Some(w) => DissipationCertificate {
            lambda0: cl.lambda0(&w.x)?,
            x: w.x,
            strict: true,
            epsilon: w.margin,
        },
        None => DissipationCertificate {
            lambda0: cl.lambda0(&bounded_real_x)?,
            x: bounded_real_x.clone(),
            strict: false,
            epsilon: T::zero(),
        },
    };
    Ok(SynthesisResult {
        g,
        x: xs,
        y: ys,
        triple,
        a1,
        a2,
        certificate,
        bounded_real_x,
    })
}

/// Constants of the H∞ objective
/// ∫⟨zᵀz⟩ + ε∫⟨xᵀx⟩ ≤ (g² − ε²)∫⟨βᵀβ⟩ + μ₁ + μ₂t.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HinfObjectiveBound<T> {
    pub epsilon: T,
    pub mu2: T,
}

/// ε = min(m, √m) for the strict LMI margin m, and μ₂ = λ₀.
pub fn verify_hinf_objective_bound<T: Real>(result: &SynthesisResult<T>) -> HinfObjectiveBound<T> {
    let m = result.certificate.epsilon.max(T::zero());
    HinfObjectiveBound {
        epsilon: m.min(m.sqrt()),
        mu2: result.certificate.lambda0,
    }
}

/// Smallest g in [lo, hi] (to relative precision `rel`) for which
/// `synthesize` succeeds, by bisection on log g. None when `hi` fails.
pub fn minimal_feasible_g<T: Real>(
    plant: &Plant<T>,
    lo: T,
    hi: T,
    rel: T,
    tol: &Tolerances<T>,
) -> Option<T> {
    bisect_feasible_level(lo, hi, rel, |g| synthesize(plant, g, tol).is_ok())
}

/// Bisection on log g for a feasibility test that holds above some level.
pub fn bisect_feasible_level<T: Real>(lo: T, hi: T, rel: T, feasible: impl Fn(T) -> bool) -> Option<T> {
    if !feasible(hi) {
        return None;
    }
    if feasible(lo) {
        return Some(lo);
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi / lo - T::one() > rel {
        let mid = (lo * hi).sqrt();
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}
