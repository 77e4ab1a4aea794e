//! Seeded experiment drivers: the exponent dichotomy at zeros of `Y`, box dimensions of the
//! crossing sets, and the `Phi_n` energy expectations.

mod covariance;
mod dichotomy;
mod dimension;
mod energy;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use covariance::{fbm_covariance_ensemble, CovarianceEstimate, DEFAULT_PAIRS};
pub use dichotomy::{run_dichotomy, DichotomyConfig, DichotomyMode, DichotomyReport, DichotomySeed, PointClass, PointRow};
pub use dimension::{brownian_median, brownian_zero_dimension, dimension_summary, run_dimension, DimensionConfig, DimensionReport, DimensionSeed};
pub use energy::{energy_target, run_energy, EnergyConfig, EnergyExperiment, EnergyMoments};

use crate::error::{Error, Result};
use crate::field::{FieldConfig, FieldEngine};
use crate::hoelder::HProfile;
use crate::lattice::derive_seed;
use crate::trajectory::TrajectoryGrid;
use crate::wavelet::KernelBank;

/// Simulation grid and series truncation shared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSpec {
    /// Analysis interval `I = [delta1, delta2]`.
    pub interval: (f64, f64),
    /// Extra grid on both sides of `I`.
    pub margin: f64,
    /// Grid step `2^-step_log2`.
    pub step_log2: u32,
    pub j_max: i32,
    pub tail_tol: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec { interval: (1.0, 1.875), margin: 0.125, step_log2: 14, j_max: 16, tail_tol: 1e-6 }
    }
}

impl SimulationSpec {
    /// `I` must lie in `[1, 2]` with `0 < delta2 - delta1 < 1`, and the grid must fit the series range.
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.interval;
        if !(a >= 1.0 && b <= 2.0 && b > a && b - a < 1.0) {
            return Err(Error::OutOfRange(format!("interval [{a}, {b}] must satisfy 1 <= a < b <= 2, b - a < 1")));
        }
        if !(self.margin >= 0.0) || a - self.margin < 0.0 {
            return Err(Error::OutOfRange(format!("margin {} invalid", self.margin)));
        }
        if !(4..=22).contains(&self.step_log2) {
            return Err(Error::OutOfRange(format!("step_log2 = {} outside 4..=22", self.step_log2)));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        2f64.powi(-(self.step_log2 as i32))
    }

    pub fn grid(&self) -> (f64, usize) {
        let t0 = self.interval.0 - self.margin;
        let t1 = self.interval.1 + self.margin;
        (t0, ((t1 - t0) / self.step()).round() as usize + 1)
    }

    pub fn field_config(&self, seed: u64) -> FieldConfig {
        let (t0, len) = self.grid();
        let t_end = t0 + (len - 1) as f64 * self.step();
        FieldConfig { j_max: self.j_max, tail_tol: self.tail_tol, t_bound: t_end.max(2.0), seed, ..FieldConfig::default() }
    }
}

/// One seeded realisation of `X` and `Y` on the grid of a [`SimulationSpec`].
pub struct Realisation {
    pub engine: FieldEngine,
    pub x: TrajectoryGrid<f64>,
    pub y: TrajectoryGrid<f64>,
}

/// Engine seed of replicate `index` of the experiment `label`.
pub fn replicate_seed(seed: u64, label: &str, index: u32) -> u64 {
    derive_seed(seed, &format!("{label}/{index}"))
}

pub fn simulate(bank: &Arc<KernelBank>, spec: &SimulationSpec, profile: &HProfile, seed: u64) -> Result<Realisation> {
    spec.validate()?;
    let engine = FieldEngine::new(bank.clone(), spec.field_config(seed))?;
    let (t0, len) = spec.grid();
    let (x, y) = engine.mbm_trajectories(profile, t0, spec.step(), len)?;
    Ok(Realisation { engine, x, y })
}

pub(crate) fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Sample mean and its standard error.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_checks() {
        let s = SimulationSpec::default();
        s.validate().unwrap();
        let (t0, len) = s.grid();
        assert_eq!(t0, 0.875);
        assert_eq!(len, 18433);
        assert!(SimulationSpec { interval: (0.5, 1.2), ..s }.validate().is_err());
        assert!(SimulationSpec { interval: (1.0, 2.0), ..s }.validate().is_err());
        assert!(SimulationSpec { interval: (1.0, 1.99), ..s }.validate().is_ok());
        assert_eq!(s.field_config(3).t_bound, 2.0);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
