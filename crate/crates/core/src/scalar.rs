//! Floating-point abstraction shared by the estimators, the quadrature and the oracle.

use std::fmt::Debug;

use num_traits::{Float, FloatConst};

/// Real scalar usable throughout the crate (`f32` or `f64`).
pub trait Real: Float + FloatConst + Debug + Default + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    fn c(x: f64) -> Self;
    /// Widening conversion to `f64`.
    fn f64(self) -> f64;
}

impl Real for f64 {
    #[inline]
    fn c(x: f64) -> Self {
        x
    }
    #[inline]
    fn f64(self) -> f64 {
        self
    }
}

impl Real for f32 {
    #[inline]
    fn c(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn f64(self) -> f64 {
        self as f64
    }
}
