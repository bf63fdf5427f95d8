//! First and second moments of linear QSDEs driven by Gaussian noise with a
//! deterministic disturbance β_w, and trajectory-level checks of the
//! dissipation inequality and the H∞ objective.

use crate::dissipativity::SupplyRate;
use crate::matops::{self, op_norm};
use crate::qsde::ItoMatrix;
use crate::scalar::{lit, Real};
use crate::RealMatrix;
use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState<T: Real> {
    pub mean: DVector<T>,
    /// Symmetrized covariance.
    pub cov: RealMatrix<T>,
}

impl<T: Real> GaussianState<T> {
    pub fn new(mean: DVector<T>, cov: RealMatrix<T>) -> Self {
        GaussianState { mean, cov }
    }

    pub fn zero(n: usize) -> Self {
        GaussianState {
            mean: DVector::zeros(n),
            cov: DMatrix::zeros(n, n),
        }
    }

    pub fn second_moment(&self) -> RealMatrix<T> {
        &self.cov + &self.mean * self.mean.transpose()
    }
}

/// Piecewise-constant β_w: `values[i]` holds on [starts[i], starts[i+1]).
/// β_w is assumed to commute with the system variables at all times.
#[derive(Clone, Debug, PartialEq)]
pub struct InputSignal<T: Real> {
    pub starts: Vec<T>,
    pub values: Vec<DVector<T>>,
    pub horizon: T,
}

impl<T: Real> InputSignal<T> {
    pub fn zero(dim: usize, horizon: T) -> Self {
        InputSignal {
            starts: vec![T::zero()],
            values: vec![DVector::zeros(dim)],
            horizon,
        }
    }

    /// Zero before `t0`, `value` afterwards.
    pub fn step(value: DVector<T>, t0: T, horizon: T) -> Self {
        InputSignal {
            starts: vec![T::zero(), t0],
            values: vec![DVector::zeros(value.len()), value],
            horizon,
        }
    }

    /// Square wave of the given half period alternating between ±`value`.
    pub fn square_wave(value: DVector<T>, half_period: T, horizon: T) -> Self {
        let mut starts = Vec::new();
        let mut values = Vec::new();
        let mut t = T::zero();
        let mut sign = T::one();
        while t < horizon {
            starts.push(t);
            values.push(&value * sign);
            t += half_period;
            sign = -sign;
        }
        InputSignal { starts, values, horizon }
    }

    pub fn dim(&self) -> usize {
        self.values.first().map(|v| v.len()).unwrap_or(0)
    }

    pub fn value_at(&self, t: T) -> &DVector<T> {
        let i = self.starts.partition_point(|&s| s <= t).max(1) - 1;
        &self.values[i]
    }
}

/// Moments on a uniform grid. Integrals are accumulated with the same RK4
/// weights as the moments themselves.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub means: Vec<DVector<T>>,
    /// Second moments ⟨ηηᵀ⟩ (symmetrized).
    pub second: Vec<RealMatrix<T>>,
    /// β_w held on step k.
    pub betas: Vec<DVector<T>>,
    /// ∫₀^{t_k} μ.
    pub int_mean: Vec<DVector<T>>,
    /// ∫₀^{t_k} ⟨ηηᵀ⟩.
    pub int_second: Vec<RealMatrix<T>>,
    /// True when ‖Ã‖·dt exceeded 0.1.
    pub coarse_step: bool,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn cov(&self, k: usize) -> RealMatrix<T> {
        matops::symmetrize(&(&self.second[k] - &self.means[k] * self.means[k].transpose()))
    }

    /// ⟨ηᵀQη⟩ at sample k.
    pub fn expect_quadratic(&self, q: &RealMatrix<T>, k: usize) -> T {
        (q * &self.second[k]).trace()
    }

    /// ∫₀^{t_k} ⟨ηᵀQη⟩ for every k.
    pub fn integral_quadratic(&self, q: &RealMatrix<T>) -> Vec<T> {
        self.int_second.iter().map(|m| (q * m).trace()).collect()
    }

    /// ∫₀^{t_k} βᵀRβ for every k.
    pub fn integral_input(&self, r: &RealMatrix<T>) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = T::zero();
        out.push(acc);
        for k in 0..self.betas.len() {
            let h = self.times[k + 1] - self.times[k];
            acc += (self.betas[k].transpose() * r * &self.betas[k])[(0, 0)] * h;
            out.push(acc);
        }
        out
    }

    /// ∫₀^{t_k} ⟨r(η, β)⟩ for a quadratic supply rate.
    pub fn integral_supply(&self, supply: &SupplyRate<T>) -> Vec<T> {
        let xx = self.integral_quadratic(&supply.r11);
        let bb = self.integral_input(&supply.r22);
        let two = lit::<T>(2.0);
        let mut cross = T::zero();
        let mut out = Vec::with_capacity(self.len());
        out.push(xx[0] + bb[0]);
        for k in 0..self.betas.len() {
            let dmu = &self.int_mean[k + 1] - &self.int_mean[k];
            cross += (dmu.transpose() * &supply.r12 * &self.betas[k])[(0, 0)] * two;
            out.push(xx[k + 1] + bb[k + 1] + cross);
        }
        out
    }

    /// CSV with time, mean components, covariance upper triangle and the
    /// running integrals ∫⟨ηᵀη⟩ and ∫βᵀβ.
    pub fn to_csv(&self) -> String {
        let n = self.means.first().map(|m| m.len()).unwrap_or(0);
        let mut s = String::from("t");
        for i in 0..n {
            let _ = write!(s, ",mean_{i}");
        }
        for i in 0..n {
            for j in i..n {
                let _ = write!(s, ",cov_{i}_{j}");
            }
        }
        s.push_str(",int_xx,int_bb\n");
        let ident = DMatrix::<T>::identity(n, n);
        let xx = self.integral_quadratic(&ident);
        let m = self.betas.first().map(|b| b.len()).unwrap_or(0);
        let bb = self.integral_input(&DMatrix::identity(m, m));
        for k in 0..self.len() {
            let _ = write!(s, "{}", self.times[k]);
            for v in self.means[k].iter() {
                let _ = write!(s, ",{v}");
            }
            let c = self.cov(k);
            for i in 0..n {
                for j in i..n {
                    let _ = write!(s, ",{}", c[(i, j)]);
                }
            }
            let _ = writeln!(s, ",{},{}", xx[k], bb[k]);
        }
        s
    }
}

/// Symmetrized diffusion [B G]·S_F·[B G]ᵀ.
pub fn diffusion<T: Real>(noise_input: &RealMatrix<T>, f: &ItoMatrix<T>) -> RealMatrix<T> {
    matops::symmetrize(&(noise_input * &f.s * noise_input.transpose()))
}

/// min(0.01, 0.1/‖Ã‖).
pub fn default_dt<T: Real>(atil: &RealMatrix<T>) -> T {
    let a = op_norm(atil);
    let cap = lit::<T>(0.01);
    if a > T::zero() {
        cap.min(lit::<T>(0.1) / a)
    } else {
        cap
    }
}

struct Deriv<T: Real> {
    mu: DVector<T>,
    m2: RealMatrix<T>,
}

fn rhs<T: Real>(
    a: &RealMatrix<T>,
    bbeta: &DVector<T>,
    n_diff: &RealMatrix<T>,
    mu: &DVector<T>,
    m2: &RealMatrix<T>,
) -> Deriv<T> {
    let cross = bbeta * mu.transpose();
    Deriv {
        mu: a * mu + bbeta,
        m2: a * m2 + m2 * a.transpose() + n_diff + &cross + cross.transpose(),
    }
}

/// RK4 propagation of μ̇ = Ãμ + B̃β and
/// Ṁ = ÃM + MÃᵀ + N + B̃βμᵀ + μβᵀB̃ᵀ for the second moment M = Σ + μμᵀ,
/// with N = [B̃ G̃]·S_F·[B̃ G̃]ᵀ. β is held at its midpoint value on each step.
pub fn propagate_moments<T: Real>(
    atil: &RealMatrix<T>,
    b_beta: &RealMatrix<T>,
    noise_input: &RealMatrix<T>,
    f: &ItoMatrix<T>,
    state0: &GaussianState<T>,
    u: &InputSignal<T>,
    dt: T,
) -> Trajectory<T> {
    let n = atil.nrows();
    let n_diff = diffusion(noise_input, f);
    let steps = (u.horizon / dt).ceil().to_usize().unwrap_or(0).max(1);
    let h = u.horizon / lit::<T>(steps as f64);
    let half = lit::<T>(0.5);
    let sixth = h / lit::<T>(6.0);
    let two = lit::<T>(2.0);
    let mut mu = state0.mean.clone();
    let mut m2 = state0.second_moment();
    let mut int_mu = DVector::zeros(n);
    let mut int_m2 = DMatrix::zeros(n, n);
    let mut out = Trajectory {
        times: vec![T::zero()],
        means: vec![mu.clone()],
        second: vec![m2.clone()],
        betas: Vec::with_capacity(steps),
        int_mean: vec![int_mu.clone()],
        int_second: vec![int_m2.clone()],
        coarse_step: op_norm(atil) * h > lit(0.1),
    };
    for k in 0..steps {
        let t = h * lit::<T>(k as f64);
        let beta = u.value_at(t + h * half).clone();
        let bb = if b_beta.ncols() == 0 { DVector::zeros(n) } else { b_beta * &beta };
        let k1 = rhs(atil, &bb, &n_diff, &mu, &m2);
        let mu2 = &mu + &k1.mu * (h * half);
        let m22 = &m2 + &k1.m2 * (h * half);
        let k2 = rhs(atil, &bb, &n_diff, &mu2, &m22);
        let mu3 = &mu + &k2.mu * (h * half);
        let m23 = &m2 + &k2.m2 * (h * half);
        let k3 = rhs(atil, &bb, &n_diff, &mu3, &m23);
        let mu4 = &mu + &k3.mu * h;
        let m24 = &m2 + &k3.m2 * h;
        let k4 = rhs(atil, &bb, &n_diff, &mu4, &m24);
        int_mu += (&mu + &mu2 * two + &mu3 * two + &mu4) * sixth;
        int_m2 += (&m2 + &m22 * two + &m23 * two + &m24) * sixth;
        mu += (k1.mu + k2.mu * two + k3.mu * two + k4.mu) * sixth;
        m2 += (k1.m2 + k2.m2 * two + k3.m2 * two + k4.m2) * sixth;
        m2 = matops::symmetrize(&m2);
        out.times.push(h * lit::<T>((k + 1) as f64));
        out.means.push(mu.clone());
        out.second.push(m2.clone());
        out.betas.push(beta);
        out.int_mean.push(int_mu.clone());
        out.int_second.push(matops::symmetrize(&int_m2));
    }
    out
}

/// min over the grid of ⟨V(η₀)⟩ + λt − ⟨V(η(t))⟩ − ∫₀ᵗ⟨r⟩ with V(η) = ηᵀXη.
pub fn verify_dissipation_empirically<T: Real>(
    traj: &Trajectory<T>,
    x: &RealMatrix<T>,
    supply: &SupplyRate<T>,
    lambda: T,
) -> T {
    let v0 = traj.expect_quadratic(x, 0);
    let ir = traj.integral_supply(supply);
    (0..traj.len())
        .map(|k| v0 + lambda * traj.times[k] - traj.expect_quadratic(x, k) - ir[k])
        .fold(T::max_value().unwrap_or(T::zero()), |a, b| a.min(b))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HinfObjectiveCheck<T> {
    pub holds: bool,
    pub min_slack: T,
}

/// ∫⟨zᵀz⟩ + ε∫⟨ηᵀη⟩ ≤ (g² − ε²)∫βᵀβ + μ₁ + μ₂t at every grid point, with
/// z = C̃η.
pub fn verify_hinf_objective<T: Real>(
    traj: &Trajectory<T>,
    ctil: &RealMatrix<T>,
    g: T,
    eps: T,
    mu1: T,
    mu2: T,
) -> HinfObjectiveCheck<T> {
    let n = ctil.ncols();
    let zz = traj.integral_quadratic(&(ctil.transpose() * ctil));
    let xx = traj.integral_quadratic(&DMatrix::identity(n, n));
    let m = traj.betas.first().map(|b| b.len()).unwrap_or(0);
    let bb = traj.integral_input(&DMatrix::identity(m, m));
    let min_slack = (0..traj.len())
        .map(|k| (g * g - eps * eps) * bb[k] + mu1 + mu2 * traj.times[k] - zz[k] - eps * xx[k])
        .fold(T::max_value().unwrap_or(T::zero()), |a, b| a.min(b));
    HinfObjectiveCheck {
        holds: min_slack >= T::zero(),
        min_slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn deterministic_decay() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let f = ItoMatrix::from_parts(DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)).unwrap();
        let s0 = GaussianState::new(DVector::from_vec(vec![1.0, 0.0]), DMatrix::zeros(2, 2));
        let tr = propagate_moments(&a, &DMatrix::zeros(2, 0), &DMatrix::zeros(2, 0), &f, &s0, &InputSignal::zero(0, 3.0), 0.01);
        for (t, m) in tr.times.iter().zip(&tr.means) {
            assert!((m[0] - (-t).exp()).abs() < 1e-8);
            assert_eq!(m[1], 0.0);
        }
        let last = tr.len() - 1;
        assert_relative_eq!(tr.int_mean[last][0], 1.0 - (-3.0f64).exp(), epsilon = 1e-9);
    }

    #[test]
    fn decoupled_covariance_matches_closed_form() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -3.0]));
        let b = DMatrix::<f64>::identity(2, 2);
        let f = crate::qsde::canonical_ito(2).unwrap();
        let tr = propagate_moments(&a, &DMatrix::zeros(2, 0), &b, &f, &GaussianState::zero(2), &InputSignal::zero(0, 2.0), 0.01);
        let last = tr.len() - 1;
        let c = tr.cov(last);
        for (i, r) in [1.0f64, 3.0].iter().enumerate() {
            let exact = (1.0 - (-2.0 * r * 2.0).exp()) / (2.0 * r);
            assert!((c[(i, i)] - exact).abs() < 1e-8);
        }
        assert!(c[(0, 1)].abs() < 1e-14);
        for k in 0..tr.len() {
            let cov = tr.cov(k);
            assert!((&cov - cov.transpose()).norm() < 1e-12);
            assert!(matops::symmetric_eigen(&cov).0[0] > -1e-12);
        }
    }

    #[test]
    fn signal_lookup() {
        let s = InputSignal::step(DVector::from_vec(vec![2.0]), 1.0, 5.0);
        assert_eq!(s.value_at(0.5)[0], 0.0);
        assert_eq!(s.value_at(1.0)[0], 2.0);
        assert_eq!(s.value_at(4.9)[0], 2.0);
        let w = InputSignal::square_wave(DVector::from_vec(vec![1.0]), 0.5, 2.0);
        assert_eq!(w.value_at(0.7)[0], -1.0);
    }

    #[test]
    fn csv_header() {
        let tr = propagate_moments(
            &(-DMatrix::<f64>::identity(2, 2)),
            &DMatrix::identity(2, 2),
            &DMatrix::zeros(2, 0),
            &ItoMatrix::from_parts(DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)).unwrap(),
            &GaussianState::zero(2),
            &InputSignal::zero(2, 0.05),
            0.01,
        );
        let csv = tr.to_csv();
        let first = csv.lines().next().unwrap();
        assert_eq!(first, "t,mean_0,mean_1,cov_0_0,cov_0_1,cov_1_1,int_xx,int_bb");
        assert_eq!(csv.lines().count(), 1 + tr.len());
    }
}
