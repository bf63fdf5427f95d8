//! Scalar abstraction and default tolerances.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating point scalar accepted by every routine in the crate.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Lossy conversion to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Numerical thresholds shared by the analysis kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances<T> {
    /// Symmetry, antisymmetry and canonical-form checks.
    pub structural: T,
    /// Residuals of matrix equations (relative to their scale).
    pub residual: T,
    /// Eigenvalues below this are treated as zero when factoring.
    pub rank: T,
    /// Distance to the imaginary axis counted as "on the axis".
    pub axis: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        // f64 values, widened by sqrt of the epsilon ratio for coarser types.
        let ratio = (T::default_epsilon() / lit::<T>(f64::EPSILON)).sqrt();
        let one = T::one();
        let widen = if ratio > one { ratio } else { one };
        Tolerances {
            structural: lit::<T>(1e-9) * widen,
            residual: lit::<T>(1e-8) * widen,
            rank: lit::<T>(1e-10) * widen,
            axis: lit::<T>(1e-7) * widen,
        }
    }
}

impl<T: Real> Tolerances<T> {
    /// Default tolerances with the residual threshold replaced.
    pub fn with_residual(residual: T) -> Self {
        Tolerances {
            residual,
            ..Self::default()
        }
    }
}
