//! Regularity estimators for sampled trajectories.

mod boxdim;
mod energy;
mod estimate;
mod exponents;
mod level_set;
mod meansquare;

pub use boxdim::{box_dimension, BoxDimension, BoxScales, BOX_MIN_POINTS};
pub use estimate::{
    ExponentEstimate, ScaleRange, EXPONENT_CAP, LOCAL_LOG_CORRECTION, POINTWISE_LOG_CORRECTION, UNIFORM_LOG_CORRECTION,
};
pub use exponents::{
    local_exponent, pointwise_exponent, uniform_exponent, uniform_exponent_values, POINTWISE_MIN_POINTS,
    UNIFORM_MIN_POINTS,
};
pub use level_set::{bisect, zero_level_set, LevelSet};
pub use energy::{energy_report, phi_n, EnergyReport};
pub use meansquare::{
    meansquare_exponent, meansquare_exponents, Ensemble, ExactMoments, IncrementMoments, MeanSquareExponents,
    ENSEMBLE_MIN_SEEDS,
};
