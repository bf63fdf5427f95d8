//! Quadratic supply rates, dissipation LMIs, the noise offset λ₀, bounded
//! realness via Riccati equations, and mean-square stability.

use crate::matops::{self, op_norm, symmetric_eigen, MatError};
use crate::qsde::ItoMatrix;
use crate::riccati::{solve_care, CareProblem};
use crate::scalar::{lit, to_f64, Real, Tolerances};
use crate::RealMatrix;
use nalgebra::DMatrix;
use num_complex::Complex;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DissipativityError {
    #[error("storage matrix is not positive (min eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("λ₀ has imaginary part {0:.3e}")]
    ImaginaryLambda(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// r(x, β) = [x; β]ᵀ [[R11, R12], [R12ᵀ, R22]] [x; β].
#[derive(Clone, Debug, PartialEq)]
pub struct SupplyRate<T: Real> {
    pub r11: RealMatrix<T>,
    pub r12: RealMatrix<T>,
    pub r22: RealMatrix<T>,
}

impl<T: Real> SupplyRate<T> {
    pub fn assembled(&self) -> RealMatrix<T> {
        matops::vstack(&[
            &matops::hstack(&[&self.r11, &self.r12]),
            &matops::hstack(&[&self.r12.transpose(), &self.r22]),
        ])
    }

    pub fn negated(&self) -> SupplyRate<T> {
        SupplyRate {
            r11: -&self.r11,
            r12: -&self.r12,
            r22: -&self.r22,
        }
    }
}

/// Supply βzᵀβz − g²βᵀβ for z = Cx + Dβ.
pub fn bounded_real_supply<T: Real>(c: &RealMatrix<T>, d: &RealMatrix<T>, g: T) -> SupplyRate<T> {
    let m = d.ncols();
    SupplyRate {
        r11: c.transpose() * c,
        r12: c.transpose() * d,
        r22: d.transpose() * d - DMatrix::<T>::identity(m, m) * (g * g),
    }
}

/// Storage matrix witnessing dissipation.
#[derive(Clone, Debug, PartialEq)]
pub struct DissipationCertificate<T: Real> {
    pub x: RealMatrix<T>,
    pub lambda0: T,
    pub strict: bool,
    /// −(largest LMI eigenvalue) when strict, 0 otherwise.
    pub epsilon: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DissipationCheck<T> {
    pub ok: bool,
    pub lmi_max_eig: T,
    pub lambda0: T,
}

/// [[AᵀX + XA + R11, R12 + XB], [·ᵀ, R22]].
pub fn dissipation_lmi<T: Real>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    supply: &SupplyRate<T>,
    x: &RealMatrix<T>,
) -> RealMatrix<T> {
    let tl = a.transpose() * x + x * a + &supply.r11;
    let tr = &supply.r12 + x * b;
    matops::symmetrize(&matops::vstack(&[
        &matops::hstack(&[&tl, &tr]),
        &matops::hstack(&[&tr.transpose(), &supply.r22]),
    ]))
}

/// λ₀ = Re tr([Bᵀ; Gᵀ]·X·[B G]·F).
pub fn compute_lambda0<T: Real>(
    x: &RealMatrix<T>,
    b: &RealMatrix<T>,
    g: &RealMatrix<T>,
    f: &ItoMatrix<T>,
) -> Result<T, DissipativityError> {
    let n = x.nrows();
    let bg = if g.ncols() == 0 {
        b.clone()
    } else if b.ncols() == 0 {
        g.clone()
    } else {
        matops::hstack(&[b, g])
    };
    if bg.nrows() != n || bg.ncols() != f.dim() {
        return Err(DissipativityError::Dimension(format!(
            "[B G] is {}x{}, X is {n}x{n}, F is {2}x{2}",
            bg.nrows(),
            bg.ncols(),
            f.dim()
        )));
    }
    let core = matops::to_complex(&(bg.transpose() * x * &bg)) * f.f();
    let tr: Complex<T> = core.trace();
    if tr.im.abs() > lit::<T>(1e-10) * (T::one() + tr.re.abs()) {
        return Err(DissipativityError::ImaginaryLambda(to_f64(tr.im)));
    }
    Ok(tr.re)
}

fn lmi_scale<T: Real>(m: &RealMatrix<T>) -> T {
    T::one() + op_norm(m)
}

/// Evaluates the dissipation LMI at X. `ok` means the LMI is negative
/// semidefinite (strictly negative definite when `strict`), judged with
/// `tol.structural` relative to the LMI's size.
#[allow(clippy::too_many_arguments)]
pub fn verify_dissipation<T: Real>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    g: &RealMatrix<T>,
    f: &ItoMatrix<T>,
    supply: &SupplyRate<T>,
    x: &RealMatrix<T>,
    strict: bool,
    tol: &Tolerances<T>,
) -> Result<DissipationCheck<T>, DissipativityError> {
    let (ex, _) = symmetric_eigen(x);
    if let Some(&lo) = ex.first() {
        if lo < -tol.structural * (T::one() + op_norm(x)) {
            return Err(DissipativityError::NotPositive(to_f64(lo)));
        }
    }
    let lmi = dissipation_lmi(a, b, supply, x);
    let (eig, _) = symmetric_eigen(&lmi);
    let lmi_max_eig = eig.last().copied().unwrap_or(T::zero());
    let thresh = tol.structural * lmi_scale(&lmi);
    let ok = if strict {
        lmi_max_eig < -thresh
    } else {
        lmi_max_eig <= thresh
    };
    let lambda0 = compute_lambda0(x, b, g, f)?;
    Ok(DissipationCheck {
        ok,
        lmi_max_eig,
        lambda0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SbrFailure {
    UnstableA,
    FeedthroughTooLarge,
    NoStabilizingSolution,
}

impl SbrFailure {
    pub fn as_str(self) -> &'static str {
        match self {
            SbrFailure::UnstableA => "unstable_a",
            SbrFailure::FeedthroughTooLarge => "feedthrough_too_large",
            SbrFailure::NoStabilizingSolution => "no_stabilizing_solution",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrictBoundedReal<T: Real> {
    pub holds: bool,
    pub reason: Option<SbrFailure>,
    /// Stabilizing Riccati solution when `holds`.
    pub x: Option<RealMatrix<T>>,
}

struct BrData<T: Real> {
    rinv: RealMatrix<T>,
    problem: CareProblem<T>,
}

fn bounded_real_care<T: Real>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    c: &RealMatrix<T>,
    d: &RealMatrix<T>,
    g: T,
    tol: &Tolerances<T>,
) -> Result<BrData<T>, SbrFailure> {
    let m = b.ncols();
    let r = DMatrix::<T>::identity(m, m) * (g * g) - d.transpose() * d;
    let pd = matops::classify_definiteness_real(&r, tol.structural)
        .map(|k| k.is_pd())
        .unwrap_or(false);
    if !pd && m > 0 {
        return Err(SbrFailure::FeedthroughTooLarge);
    }
    let rinv = if m == 0 {
        DMatrix::zeros(0, 0)
    } else {
        r.try_inverse().ok_or(SbrFailure::FeedthroughTooLarge)?
    };
    let drift = a + b * &rinv * d.transpose() * c;
    let mq = b * &rinv * b.transpose();
    let q = c.transpose() * c + c.transpose() * d * &rinv * d.transpose() * c;
    let problem = CareProblem::new(drift, mq, q).map_err(|_| SbrFailure::NoStabilizingSolution)?;
    Ok(BrData { rinv, problem })
}

/// Strict bounded realness at attenuation g: A Hurwitz, g²I − DᵀD ≻ 0 and a
/// stabilizing X ⪰ 0 of AᵀX + XA + CᵀC + (XB + CᵀD)(g²I − DᵀD)⁻¹(BᵀX + DᵀC) = 0.
pub fn strict_bounded_real_check<T: Real>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    c: &RealMatrix<T>,
    d: &RealMatrix<T>,
    g: T,
    tol: &Tolerances<T>,
) -> StrictBoundedReal<T> {
    let fail = |r| StrictBoundedReal {
        holds: false,
        reason: Some(r),
        x: None,
    };
    match matops::spectral_abscissa(a) {
        Ok(s) if s < T::zero() || a.nrows() == 0 => {}
        _ => return fail(SbrFailure::UnstableA),
    }
    let data = match bounded_real_care(a, b, c, d, g, tol) {
        Ok(d) => d,
        Err(r) => return fail(r),
    };
    let _ = &data.rinv;
    let sol = match solve_care(&data.problem, tol) {
        Ok(s) if s.stabilizing => s,
        _ => return fail(SbrFailure::NoStabilizingSolution),
    };
    let (ex, _) = symmetric_eigen(&sol.x);
    if let Some(&lo) = ex.first() {
        if lo < -tol.structural * (T::one() + op_norm(&sol.x)) {
            return fail(SbrFailure::NoStabilizingSolution);
        }
    }
    StrictBoundedReal {
        holds: true,
        reason: None,
        x: Some(sol.x),
    }
}

/// A storage matrix X̃ ≻ 0 making the bounded-real LMI strictly negative,
/// obtained from the Riccati equation with its constant term raised by εI.
#[derive(Clone, Debug, PartialEq)]
pub struct StrictWitness<T: Real> {
    pub x: RealMatrix<T>,
    /// −(largest LMI eigenvalue) at X̃.
    pub margin: T,
    pub perturbation: T,
}

/// Searches ε over a logarithmic grid and keeps the X̃ with the largest
/// LMI margin.
pub fn strict_lmi_witness<T: Real>(
    a: &RealMatrix<T>,
    b: &RealMatrix<T>,
    c: &RealMatrix<T>,
    d: &RealMatrix<T>,
    g: T,
    tol: &Tolerances<T>,
) -> Option<StrictWitness<T>> {
    let base = bounded_real_care(a, b, c, d, g, tol).ok()?;
    let n = a.nrows();
    let supply = bounded_real_supply(c, d, g);
    let scale = T::one() + op_norm(&base.problem.q);
    let mut best: Option<StrictWitness<T>> = None;
    for k in 0..=48 {
        let eps = scale * lit::<T>(10f64.powf(-(k as f64) / 4.0));
        let p = CareProblem {
            q: &base.problem.q + DMatrix::<T>::identity(n, n) * eps,
            ..base.problem.clone()
        };
        let Ok(sol) = solve_care(&p, tol) else { continue };
        if !sol.stabilizing {
            continue;
        }
        let (ex, _) = symmetric_eigen(&sol.x);
        if ex.first().is_none_or(|&lo| lo <= T::zero()) {
            continue;
        }
        let (el, _) = symmetric_eigen(&dissipation_lmi(a, b, &supply, &sol.x));
        let margin = -el.last().copied().unwrap_or(T::zero());
        if margin <= T::zero() {
            continue;
        }
        if best.as_ref().is_none_or(|w| margin > w.margin) {
            best = Some(StrictWitness {
                x: sol.x,
                margin,
                perturbation: eps,
            });
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanSquareStability<T: Real> {
    pub stable: bool,
    /// Solution of ĀᵀX + XĀ + I = 0 when stable.
    pub x: Option<RealMatrix<T>>,
}

/// Mean-square stability of dη = Āη dt + noise, i.e. Ā Hurwitz.
pub fn mean_square_stable<T: Real>(abar: &RealMatrix<T>) -> MeanSquareStability<T> {
    let n = abar.nrows();
    let stable = matops::spectral_abscissa(abar)
        .map(|s| s < T::zero() || n == 0)
        .unwrap_or(false);
    let x = if stable {
        matops::solve_lyapunov(abar, &DMatrix::identity(n, n)).ok()
    } else {
        None
    };
    MeanSquareStability { stable, x }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsde::canonical_ito;
    use approx::assert_relative_eq;

    fn m1(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn trivial_lmi() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let b = DMatrix::zeros(2, 0);
        let g = DMatrix::zeros(2, 0);
        let supply = SupplyRate {
            r11: DMatrix::zeros(2, 2),
            r12: DMatrix::zeros(2, 0),
            r22: DMatrix::zeros(0, 0),
        };
        let f = ItoMatrix::from_parts(DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)).unwrap();
        let r = verify_dissipation(&a, &b, &g, &f, &supply, &DMatrix::identity(2, 2), false, &Tolerances::default()).unwrap();
        assert!(r.ok);
        assert_relative_eq!(r.lmi_max_eig, -2.0, epsilon = 1e-12);
        assert_eq!(r.lambda0, 0.0);
    }

    #[test]
    fn lambda0_examples() {
        let f = canonical_ito::<f64>(2).unwrap();
        let b = DMatrix::identity(2, 2);
        let g = DMatrix::zeros(2, 0);
        assert_relative_eq!(compute_lambda0(&DMatrix::identity(2, 2), &b, &g, &f).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(compute_lambda0(&DMatrix::zeros(2, 2), &b, &g, &f).unwrap(), 0.0);
        let x = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let l1 = compute_lambda0(&x, &b, &g, &f).unwrap();
        let l3 = compute_lambda0(&(&x * 3.0), &b, &g, &f).unwrap();
        assert_relative_eq!(l3, 3.0 * l1, epsilon = 1e-12);
    }

    #[test]
    fn supply_shapes() {
        let s = bounded_real_supply(&DMatrix::<f64>::zeros(1, 2), &DMatrix::zeros(1, 1), 1.0);
        let r = s.assembled();
        assert_eq!(r, r.transpose());
        assert_eq!(r[(2, 2)], -1.0);
    }

    #[test]
    fn scalar_bounded_real() {
        let r = strict_bounded_real_check(&m1(-1.0), &m1(1.0), &m1(1.0), &m1(0.0), 2.0, &Tolerances::default());
        assert!(r.holds);
        // −2x + 1 + x²/4 = 0, stabilizing root.
        assert_relative_eq!(r.x.unwrap()[(0, 0)], 4.0 - 12f64.sqrt(), epsilon = 1e-12);
        let r = strict_bounded_real_check(&m1(-1.0), &m1(1.0), &m1(1.0), &m1(0.0), 0.5, &Tolerances::default());
        assert!(!r.holds);
        assert_eq!(r.reason, Some(SbrFailure::NoStabilizingSolution));
        let r = strict_bounded_real_check(&m1(1.0), &m1(1.0), &m1(1.0), &m1(0.0), 2.0, &Tolerances::default());
        assert_eq!(r.reason, Some(SbrFailure::UnstableA));
        let r = strict_bounded_real_check(&m1(-1.0), &m1(1.0), &m1(1.0), &m1(3.0), 2.0, &Tolerances::default());
        assert_eq!(r.reason, Some(SbrFailure::FeedthroughTooLarge));
    }

    #[test]
    fn witness_dominates_riccati() {
        let (a, b, c, d) = (m1(-1.0), m1(1.0), m1(1.0), m1(0.0));
        let tol = Tolerances::default();
        let x = strict_bounded_real_check(&a, &b, &c, &d, 2.0, &tol).x.unwrap();
        let w = strict_lmi_witness(&a, &b, &c, &d, 2.0, &tol).unwrap();
        assert!(w.margin > 0.0);
        assert!(w.x[(0, 0)] > x[(0, 0)]);
    }

    #[test]
    fn mean_square_examples() {
        let r = mean_square_stable(&(-DMatrix::<f64>::identity(2, 2)));
        assert!(r.stable);
        assert!((r.x.unwrap() - DMatrix::<f64>::identity(2, 2) * 0.5).norm() < 1e-14);
        let r = mean_square_stable(&matops::j2::<f64>());
        assert!(!r.stable);
        assert!(r.x.is_none());
    }
}
