//! Simulation and regularity analysis of multifractional Brownian motion through a random
//! wavelet series built on the Lemarié-Meyer wavelet.

pub mod error;
pub mod experiments;
pub mod field;
pub mod hoelder;
pub mod lattice;
pub mod oracle;
pub mod quadrature;
pub mod reference;
pub mod regularity;
pub mod scalar;
pub mod special;
pub mod trajectory;
pub mod wavelet;

pub use error::{Error, Result};
pub use scalar::Real;

/// Sampled path in double precision, the type the engine produces.
pub type Trajectory = trajectory::TrajectoryGrid<f64>;
pub type Trajectory32 = trajectory::TrajectoryGrid<f32>;
pub type Exponent = regularity::ExponentEstimate<f64>;
pub type Exponent32 = regularity::ExponentEstimate<f32>;
pub type Kernel = oracle::WienerKernel<f64>;
