//! Linear quantum stochastic systems: commutation-preserving dynamics,
//! physical realizability, two-Riccati H-infinity synthesis, controller
//! realization and dissipativity certificates.
//!
//! Every numerical routine is generic over a [`Real`] scalar (`f32` or
//! `f64`). The aliases at the bottom of this file pin the common `f64` case.

pub mod dissipativity;
pub mod fixtures;
pub mod io;
pub mod matops;
pub mod momentsim;
pub mod qsde;
pub mod realizability;
pub mod realization;
pub mod riccati;
pub mod robustness;
pub mod scalar;
pub mod synthesis;

pub use scalar::{Real, Tolerances};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

/// Dense real matrix.
pub type RealMatrix<T> = DMatrix<T>;
/// Dense complex matrix.
pub type ComplexMatrix<T> = DMatrix<Complex<T>>;

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex<f64>>;
pub type Vector = DVector<f64>;
pub type LinearQsde64 = qsde::LinearQsde<f64>;
pub type Plant64 = synthesis::Plant<f64>;
pub type ControllerTriple64 = synthesis::ControllerTriple<f64>;
pub type FullController64 = realization::FullController<f64>;
pub type ClosedLoop64 = synthesis::ClosedLoop<f64>;
pub type Tolerances64 = Tolerances<f64>;
