//! Random instance generators and checks shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex;
use qsynth::dissipativity::{strict_bounded_real_check, verify_dissipation, bounded_real_supply};
use qsynth::matops::{selection_matrix, spectral_abscissa};
use qsynth::qsde::{
    commutation_ode_oracle, default_structure_tol, preserves_commutation, CommutationMatrix, ItoMatrix,
    LinearQsde,
};
use qsynth::realizability::{build_oscillator, check_physical_realizability, extract_hamiltonian_coupling, OscillatorParams};
use qsynth::realization::{
    realize_classical_controller, realize_mixed_controller, realize_quantum_controller, FullController,
    RealizationChoice,
};
use qsynth::riccati::hinf_norm;
use qsynth::synthesis::ControllerTriple;
use qsynth::{CMat, Mat, Tolerances};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn stable(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let m = uniform(rng, n, n);
    let shift = spectral_abscissa(&m).unwrap() + rng.gen_range(0.1..1.0);
    m - DMatrix::identity(n, n) * shift
}

pub fn random_params(rng: &mut ChaCha8Rng) -> (OscillatorParams<f64>, usize) {
    let n = 2 * rng.gen_range(1..=3);
    let nw2 = rng.gen_range(1..=3);
    let ny = 2 * rng.gen_range(0..=nw2);
    let r = uniform(rng, n, n);
    let r = (&r + r.transpose()) * 0.5;
    let lambda: CMat = DMatrix::from_fn(nw2, n, |_, _| {
        Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    (OscillatorParams { r, lambda }, ny)
}

/// Largest deviation of extract(build(R, Λ)) from (R, Λ).
pub fn oscillator_roundtrip_error(seed: u64) -> f64 {
    let mut g = rng(seed);
    let (p, ny) = random_params(&mut g);
    let sys = build_oscillator(&p, ny).unwrap();
    let back = extract_hamiltonian_coupling(&sys).unwrap();
    (back.r - &p.r).amax().max((back.lambda - &p.lambda).map(|z| z.norm()).max())
}

pub fn oscillator_is_realizable(seed: u64) -> bool {
    let mut g = rng(seed);
    let (p, ny) = random_params(&mut g);
    let sys = build_oscillator(&p, ny).unwrap();
    check_physical_realizability(&sys, None).unwrap().realizable
}

pub const ORACLE_TOL: f64 = 1e-9;

/// An oscillator, with its drift perturbed when `broken`; returns
/// (preserves_commutation verdict, oracle verdict).
pub fn commutation_agreement(seed: u64, broken: bool) -> (bool, bool) {
    let mut g = rng(seed);
    let (mut p, ny) = random_params(&mut g);
    p.r *= 0.3;
    let mut sys = build_oscillator(&p, ny).unwrap();
    if broken {
        let n = sys.n();
        sys.a += uniform(&mut g, n, n) * 0.5;
    }
    let tol = default_structure_tol(&sys.a, &sys.b, &Tolerances::default());
    let check = preserves_commutation(&sys, tol).holds;
    let dev = commutation_ode_oracle(&sys, 1.0, 1000);
    (check, dev <= 10.0 * ORACLE_TOL)
}

pub fn random_triple(rng: &mut ChaCha8Rng, nk: usize, ny: usize, nu: usize) -> ControllerTriple<f64> {
    ControllerTriple {
        a_k: uniform(rng, nk, nk),
        b_k: uniform(rng, nk, ny),
        c_k: uniform(rng, nu, nk),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Path {
    Quantum,
    Classical,
    Mixed,
}

/// A shuffled degenerate canonical commutation matrix with `nprime`
/// classical variables.
pub fn shuffled_theta(rng: &mut ChaCha8Rng, n: usize, nprime: usize) -> CommutationMatrix<f64> {
    let base = CommutationMatrix::<f64>::degenerate(n, nprime).unwrap();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let p: Mat = selection_matrix(&order, n);
    CommutationMatrix::from_matrix(&p * base.matrix() * p.transpose()).unwrap()
}

pub fn realize_random(seed: u64, path: Path) -> (ControllerTriple<f64>, FullController<f64>) {
    let mut g = rng(seed);
    let nk = 2 * g.gen_range(1..=3);
    let ny = 2 * g.gen_range(1..=2);
    let nu = 2 * g.gen_range(1..=2);
    let t = random_triple(&mut g, nk, ny, nu);
    let choice = RealizationChoice::default();
    let c = match path {
        Path::Quantum => realize_quantum_controller(&t, &choice).unwrap(),
        Path::Classical => realize_classical_controller(&t).unwrap(),
        Path::Mixed => {
            let np = 2 * g.gen_range(0..=nk / 2);
            let theta = shuffled_theta(&mut g, nk, np);
            realize_mixed_controller(&t, &theta, &choice).unwrap()
        }
    };
    (t, c)
}

/// Largest realizability residual of the realized controller, or `None`
/// when it is not accepted or has a direct y → u term.
pub fn realized_residual(ctrl: &FullController<f64>) -> Option<f64> {
    let sys = ctrl.as_qsde().ok()?;
    let rep = check_physical_realizability(&sys, Some(1e-9)).ok()?;
    (rep.realizable && ctrl.no_feedthrough()).then(|| rep.residual_a.max(rep.residual_b))
}

pub struct StableSystem {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Mat,
}

pub fn random_stable_system(seed: u64) -> StableSystem {
    let mut g = rng(seed);
    let n = g.gen_range(1..=5);
    let m = g.gen_range(1..=3);
    let p = g.gen_range(1..=3);
    StableSystem {
        a: stable(&mut g, n),
        b: uniform(&mut g, n, m),
        c: uniform(&mut g, p, n),
        d: DMatrix::zeros(p, m),
    }
}

/// Checks SBR(g) ⇔ ‖G‖∞ < g − 1e-6 at levels around the norm. Levels
/// within the bisection tolerance of the norm are skipped.
pub fn bounded_real_equivalence(seed: u64) -> Result<(), String> {
    let s = random_stable_system(seed);
    let norm = hinf_norm(&s.a, &s.b, &s.c, &s.d, 1e-10).map_err(|e| e.to_string())?;
    let tol = Tolerances::default();
    for f in [0.5, 0.9, 0.99, 1.01, 1.1, 2.0] {
        let g = norm * f;
        let sbr = strict_bounded_real_check(&s.a, &s.b, &s.c, &s.d, g, &tol);
        if sbr.holds != (norm < g - 1e-6) {
            return Err(format!("seed {seed}: norm {norm}, g {g}, sbr {}", sbr.holds));
        }
        let n = s.a.nrows();
        if let Some(x) = &sbr.x {
            let m = s.b.ncols();
            let f = ItoMatrix::<f64> { s: DMatrix::identity(m, m), tim: DMatrix::zeros(m, m) };
            let supply = bounded_real_supply(&s.c, &s.d, g);
            let chk = verify_dissipation(&s.a, &s.b, &DMatrix::zeros(n, 0), &f, &supply, x, false, &tol)
                .map_err(|e| e.to_string())?;
            if !chk.ok {
                return Err(format!("seed {seed}: Riccati X fails the LMI (max eig {})", chk.lmi_max_eig));
            }
        }
    }
    Ok(())
}

pub fn system_from(a: Mat, b: Mat, c: Mat, d: Mat, theta: CommutationMatrix<f64>, ito: ItoMatrix<f64>) -> LinearQsde<f64> {
    LinearQsde::new(a, b, c, d, theta, ito, 0).unwrap()
}
