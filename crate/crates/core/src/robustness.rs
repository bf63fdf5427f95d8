//! Robust mean-square stability against a norm-bounded real uncertainty
//! Δ entering the drift, via overbounding and a small-gain certificate.

use crate::dissipativity::{mean_square_stable, strict_bounded_real_check};
use crate::matops::{hstack, op_norm, spectral_abscissa, vstack, MatError};
use crate::qsde::{canonical_ito, ItoMatrix};
use crate::riccati::hinf_norm;
use crate::scalar::{lit, Real, Tolerances};
use crate::synthesis::{ClosedLoop, Plant, SynthesisError};
use crate::RealMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RobustnessError {
    #[error("scaling matrix S is singular")]
    SingularScaling,
    #[error("uncertainty bound μ must be positive")]
    NonPositiveMu,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Mat(#[from] MatError),
}

/// A plant whose drift is A + (μ/2)·S·Δ·S⁻¹ for an unknown ΔᵀΔ ⪯ I.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertainPlant<T: Real> {
    pub nominal: Plant<T>,
    pub mu: T,
    pub s: RealMatrix<T>,
}

/// Location of the uncertainty input columns of B̃ and output rows of C̃.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UncertaintyChannel {
    pub w_start: usize,
    pub z_start: usize,
    pub dim: usize,
}

impl<T: Real> UncertainPlant<T> {
    pub fn channel(&self) -> UncertaintyChannel {
        UncertaintyChannel {
            w_start: self.nominal.n_w(),
            z_start: self.nominal.n_z(),
            dim: self.s.nrows(),
        }
    }

    pub fn augmented(&self, g: T) -> Result<Plant<T>, RobustnessError> {
        overbound_uncertainty(&self.nominal, self.mu, &self.s, g)
    }

    /// Δ in the scaled channel that reproduces a drift shift of −(δ/2)·I.
    pub fn delta_for_shift(&self, delta: T, g: T) -> RealMatrix<T> {
        let k = self.s.nrows();
        DMatrix::identity(k, k) * (-delta / (self.mu * g))
    }
}

/// Appends the uncertainty channel: B1 ← [B1, (μ/2)S], C1 ← [C1; g·S⁻¹],
/// D12 ← [D12; 0], D21 ← [D21, 0]. In the augmented loop the admissible
/// perturbations satisfy ΔᵀΔ ⪯ g⁻²I.
pub fn overbound_uncertainty<T: Real>(
    plant: &Plant<T>,
    mu: T,
    s: &RealMatrix<T>,
    g: T,
) -> Result<Plant<T>, RobustnessError> {
    plant.validate()?;
    if mu <= T::zero() {
        return Err(RobustnessError::NonPositiveMu);
    }
    let n = plant.n();
    if s.nrows() != n || s.ncols() != n {
        return Err(RobustnessError::Dimension(format!("S must be {n}x{n}")));
    }
    let s_inv = s.clone().try_inverse().ok_or(RobustnessError::SingularScaling)?;
    let half = lit::<T>(0.5);
    let f_delta = if n % 2 == 0 {
        canonical_ito(n).map_err(SynthesisError::from)?
    } else {
        ItoMatrix {
            s: DMatrix::identity(n, n),
            tim: DMatrix::zeros(n, n),
        }
    };
    let mut p = plant.clone();
    p.b1 = hstack(&[&plant.b1, &(s * (mu * half))]);
    p.c1 = vstack(&[&plant.c1, &(s_inv * g)]);
    p.d12 = vstack(&[&plant.d12, &DMatrix::zeros(n, plant.n_u())]);
    p.d21 = hstack(&[&plant.d21, &DMatrix::zeros(plant.n_y(), n)]);
    p.f_w = ItoMatrix::block_diag(&[&plant.f_w, &f_delta]);
    Ok(p)
}

fn channel_blocks<T: Real>(
    cl: &ClosedLoop<T>,
    ch: &UncertaintyChannel,
) -> Result<(RealMatrix<T>, RealMatrix<T>), RobustnessError> {
    if ch.w_start + ch.dim > cl.btil.ncols() || ch.z_start + ch.dim > cl.ctil.nrows() {
        return Err(RobustnessError::Dimension(
            "uncertainty channel outside the closed-loop blocks".to_string(),
        ));
    }
    Ok((
        cl.btil.columns(ch.w_start, ch.dim).into_owned(),
        cl.ctil.rows(ch.z_start, ch.dim).into_owned(),
    ))
}

/// Ā = Ã + B̃_Δ·Δ·C̃_Δ.
pub fn perturbed_drift<T: Real>(
    cl: &ClosedLoop<T>,
    ch: &UncertaintyChannel,
    delta: &RealMatrix<T>,
) -> Result<RealMatrix<T>, RobustnessError> {
    let (b, c) = channel_blocks(cl, ch)?;
    if delta.nrows() != ch.dim || delta.ncols() != ch.dim {
        return Err(RobustnessError::Dimension(format!("Δ must be {0}x{0}", ch.dim)));
    }
    Ok(&cl.atil + b * delta * c)
}

/// True when ‖Δ‖ ≤ 1/g up to a relative tolerance.
pub fn admissible<T: Real>(delta: &RealMatrix<T>, g: T, tol: T) -> bool {
    op_norm(delta) * g <= T::one() + tol
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustReport<T> {
    pub certified: bool,
    /// H∞ norm of the normalized channel C̃_Δ(sI − Ã)⁻¹B̃_Δ / g.
    pub channel_norm: T,
    /// Largest spectral abscissa of Ā over all sampled Δ.
    pub worst_margin: T,
    /// (t, abscissa) for the structured samples Δ = (t/g)·I, t ∈ [−1, 1].
    pub structured: Vec<(T, T)>,
    /// All sampled Δ gave a mean-square stable loop.
    pub all_samples_stable: bool,
}

/// Small-gain certificate plus a sampled corroboration over `grid`
/// structured and `random` unstructured admissible Δ.
pub fn robust_stability_check<T: Real>(
    cl: &ClosedLoop<T>,
    ch: &UncertaintyChannel,
    g: T,
    grid: usize,
    random: usize,
    seed: u64,
    tol: &Tolerances<T>,
) -> Result<RobustReport<T>, RobustnessError> {
    let (b, c) = channel_blocks(cl, ch)?;
    let cn = &c / g;
    let d0 = DMatrix::zeros(ch.dim, ch.dim);
    let certified = strict_bounded_real_check(&cl.atil, &b, &cn, &d0, T::one(), tol).holds;
    let channel_norm = if spectral_abscissa(&cl.atil)? < T::zero() {
        hinf_norm(&cl.atil, &b, &cn, &d0, lit(1e-9)).unwrap_or(T::max_value().unwrap_or(T::one()))
    } else {
        T::max_value().unwrap_or(T::one())
    };
    let k = ch.dim;
    let mut samples: Vec<(Option<T>, RealMatrix<T>)> = Vec::with_capacity(grid + random);
    for i in 0..grid {
        let t = if grid == 1 {
            T::zero()
        } else {
            lit::<T>(-1.0 + 2.0 * i as f64 / (grid - 1) as f64)
        };
        samples.push((Some(t), DMatrix::identity(k, k) * (t / g)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let m = DMatrix::<T>::from_fn(k, k, |_, _| lit(rng.gen::<f64>() * 2.0 - 1.0));
        let scale: f64 = rng.gen();
        let nm = op_norm(&m);
        let d = if nm > T::zero() { m * (lit::<T>(scale) / (nm * g)) } else { m };
        samples.push((None, d));
    }
    let results: Vec<(Option<T>, T, bool)> = samples
        .par_iter()
        .map(|(t, d)| {
            let abar = &cl.atil + &b * d * &c;
            let sa = spectral_abscissa(&abar).unwrap_or(T::max_value().unwrap_or(T::one()));
            (*t, sa, mean_square_stable(&abar).stable)
        })
        .collect();
    let worst_margin = results
        .iter()
        .map(|r| r.1)
        .fold(spectral_abscissa(&cl.atil)?, |a, b| a.max(b));
    Ok(RobustReport {
        certified,
        channel_norm,
        worst_margin,
        structured: results.iter().filter_map(|r| r.0.map(|t| (t, r.1))).collect(),
        all_samples_stable: results.iter().all(|r| r.2),
    })
}
