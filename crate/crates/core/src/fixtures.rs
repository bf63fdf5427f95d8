//! Worked optical examples: a three-port cavity, its uncertain and
//! homodyne-measured variants, and a cavity coupled to an amplifier.

use crate::matops::{block_diag, hstack, vstack};
use crate::qsde::{canonical_ito, CommutationMatrix, ItoMatrix};
use crate::robustness::UncertainPlant;
use crate::synthesis::Plant;
use crate::Mat;
use nalgebra::DMatrix;

pub const KAPPA1: f64 = 2.6;
pub const KAPPA2: f64 = 0.2;
pub const KAPPA3: f64 = 0.2;
pub const GAMMA: f64 = KAPPA1 + KAPPA2 + KAPPA3;

fn eye(n: usize) -> Mat {
    DMatrix::identity(n, n)
}

fn zeros(r: usize, c: usize) -> Mat {
    DMatrix::zeros(r, c)
}

/// Cavity with vacuum port v (κ₁), disturbance/measurement port w (κ₂) and
/// control/performance port u (κ₃).
pub fn cavity() -> Plant<f64> {
    Plant {
        a: eye(2) * (-GAMMA / 2.0),
        b0: eye(2) * -KAPPA1.sqrt(),
        b1: eye(2) * -KAPPA2.sqrt(),
        b2: eye(2) * -KAPPA3.sqrt(),
        c1: eye(2) * KAPPA3.sqrt(),
        d12: eye(2),
        c2: eye(2) * KAPPA2.sqrt(),
        d20: zeros(2, 2),
        d21: eye(2),
        f_v: canonical_ito(2).unwrap(),
        f_w: canonical_ito(2).unwrap(),
        theta: CommutationMatrix::canonical(2).unwrap(),
    }
}

/// Uncertainty bound μ on κ₁ and the scaling S used to overbound it.
pub const MU: f64 = 0.1;
pub const SCALE: f64 = 1.5;

/// The cavity with κ₁ known only up to ±μ.
pub fn uncertain_cavity() -> UncertainPlant<f64> {
    UncertainPlant {
        nominal: cavity(),
        mu: MU,
        s: eye(2) * SCALE,
    }
}

/// The cavity with κ₁ replaced by κ₁ + δ.
pub fn perturbed_cavity(delta: f64) -> Plant<f64> {
    let mut p = cavity();
    p.a = eye(2) * (-(GAMMA + delta) / 2.0);
    p.b0 = eye(2) * -(KAPPA1 + delta).sqrt();
    p
}

/// The cavity with a single real quadrature of port w measured.
pub fn cavity_measured() -> Plant<f64> {
    let mut p = cavity();
    p.c2 = DMatrix::from_row_slice(1, 2, &[KAPPA2.sqrt(), 0.0]);
    p.d20 = zeros(1, 2);
    p.d21 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    p
}

pub const ALPHA: f64 = 1.0;
pub const BETA: f64 = 0.5;
pub const THERMAL_N: f64 = 0.5;

/// Cavity whose control port is driven through a phase-insensitive
/// amplifier with gain α, loss β and an inverted heat bath of thermal
/// parameter N.
pub fn amplifier_cavity() -> Plant<f64> {
    let a = vstack(&[
        &hstack(&[&(eye(2) * (-GAMMA / 2.0)), &(eye(2) * -(KAPPA3 * ALPHA).sqrt())]),
        &hstack(&[&zeros(2, 2), &(eye(2) * (-(ALPHA - BETA) / 2.0))]),
    ]);
    let bath = ItoMatrix::from_parts(eye(2) * (2.0 * THERMAL_N + 1.0), crate::matops::j2()).unwrap();
    Plant {
        a,
        b0: block_diag(&[&(eye(2) * -KAPPA1.sqrt()), &(eye(2) * BETA.sqrt())]),
        b1: vstack(&[&(eye(2) * -KAPPA2.sqrt()), &zeros(2, 2)]),
        b2: vstack(&[&(eye(2) * -KAPPA3.sqrt()), &(eye(2) * -ALPHA.sqrt())]),
        c1: hstack(&[&(eye(2) * KAPPA3.sqrt()), &zeros(2, 2)]),
        d12: eye(2),
        c2: hstack(&[&(eye(2) * KAPPA2.sqrt()), &zeros(2, 2)]),
        d20: zeros(2, 4),
        d21: eye(2),
        f_v: ItoMatrix::block_diag(&[&canonical_ito(2).unwrap(), &bath]),
        f_w: canonical_ito(2).unwrap(),
        theta: CommutationMatrix::canonical(4).unwrap(),
    }
}
