//! Scalar abstraction for the core math.
//!
//! All geometry, residual, and metric code is generic over [`Real`], so the
//! same evaluation paths run on `f32`, `f64`, and the forward-mode
//! [`Dual`](crate::dual::Dual) type used for automatic differentiation.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar: `f32`, `f64`, or `Dual<T>`.
pub trait Real: Float + FromPrimitive + Debug + 'static {
    /// Convert an `f64` constant into this scalar type.
    ///
    /// Panics if the value is not representable; only used for finite
    /// literals and configuration values.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant")
    }
}

impl<T> Real for T where T: Float + FromPrimitive + Debug + 'static {}
