use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{median, replicate_seed, simulate, SimulationSpec};
use crate::error::{Error, Result};
use crate::field::{FieldConfig, FieldEngine};
use crate::hoelder::HProfile;
use crate::regularity::{box_dimension, zero_level_set, BoxDimension, BoxScales, BOX_MIN_POINTS};
use crate::wavelet::KernelBank;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimensionConfig {
    pub profile: HProfile,
    pub simulation: SimulationSpec,
    pub seeds: u32,
    pub eta: f64,
    /// Allowance for the box-counting estimator below `1 - eta - inf H`.
    pub slack: f64,
    pub scales: BoxScales,
    pub refine_tol: f64,
    /// Brownian paths for the zero-set calibration of the box counter.
    pub brownian_seeds: u32,
    pub brownian_step_log2: u32,
    pub brownian_scales: BoxScales,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        DimensionConfig {
            profile: HProfile::remark_preset(),
            simulation: SimulationSpec { margin: 0.0, ..SimulationSpec::default() },
            seeds: 20,
            eta: 0.05,
            slack: 0.15,
            scales: BoxScales::new(12, 3),
            refine_tol: 1e-9,
            brownian_seeds: 10,
            brownian_step_log2: 16,
            brownian_scales: BoxScales::new(13, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionSeed {
    pub index: u32,
    pub crossings: usize,
    pub dimension: Option<BoxDimension>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub seeds: Vec<DimensionSeed>,
    pub nonempty_fraction: f64,
    /// `1 - eta - inf_I H`.
    pub bound: f64,
    pub slack: f64,
    /// Median box dimension over seeds with at least [`BOX_MIN_POINTS`] crossings.
    pub median_dimension: Option<f64>,
    pub pass: Option<bool>,
    /// Median box dimension of Brownian zero sets, when computed.
    pub brownian_median: Option<f64>,
}

/// Box dimensions of given crossing sets against the lower bound `1 - eta - inf_I H`.
pub fn dimension_summary(
    crossing_sets: &[Vec<f64>],
    profile: &HProfile,
    interval: (f64, f64),
    eta: f64,
    slack: f64,
    scales: BoxScales,
) -> Result<DimensionReport> {
    if crossing_sets.is_empty() {
        return Err(Error::Insufficient("no crossing sets".into()));
    }
    let seeds = crossing_sets
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let dimension = if c.len() >= BOX_MIN_POINTS { box_dimension(c, scales)? } else { None };
            Ok(DimensionSeed { index: i as u32, crossings: c.len(), dimension })
        })
        .collect::<Result<Vec<_>>>()?;
    let dims: Vec<f64> = seeds.iter().filter_map(|s| s.dimension.as_ref().map(|d| d.dimension)).collect();
    let bound = 1.0 - eta - profile.range_on(interval.0, interval.1).0;
    let median_dimension = median(&dims);
    Ok(DimensionReport {
        nonempty_fraction: seeds.iter().filter(|s| s.crossings > 0).count() as f64 / seeds.len() as f64,
        bound,
        slack,
        pass: median_dimension.map(|m| m >= bound - slack),
        median_dimension,
        seeds,
        brownian_median: None,
    })
}

/// Crossing sets of `Y` on `I` per replicate and their box dimensions.
pub fn run_dimension(bank: &Arc<KernelBank>, cfg: &DimensionConfig, top_seed: u64) -> Result<(DimensionReport, Vec<Vec<f64>>)> {
    cfg.simulation.validate()?;
    cfg.profile.validate()?;
    let (a, b) = cfg.simulation.interval;
    let sets = (0..cfg.seeds)
        .map(|i| {
            let real = simulate(bank, &cfg.simulation, &cfg.profile, replicate_seed(top_seed, "dichotomy", i))?;
            let eval = |s: f64| real.engine.eval_y(&cfg.profile, s).unwrap_or(f64::NAN);
            let ls = zero_level_set(&real.y, cfg.refine_tol, Some(&eval), None)?;
            Ok(ls.points.into_iter().filter(|&s| s >= a && s <= b).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = dimension_summary(&sets, &cfg.profile, cfg.simulation.interval, cfg.eta, cfg.slack, cfg.scales)?;
    report.brownian_median = brownian_median(bank, top_seed, cfg.brownian_seeds, cfg.brownian_step_log2, cfg.brownian_scales)?;
    Ok((report, sets))
}

/// Box dimension of the zero set of a Brownian path on `[0, 1]` sampled at step `2^-step_log2`.
pub fn brownian_zero_dimension(bank: &Arc<KernelBank>, seed: u64, step_log2: u32, scales: BoxScales) -> Result<Option<BoxDimension>> {
    let cfg = FieldConfig { j_max: step_log2 as i32 + 2, t_bound: 1.0, seed, ..FieldConfig::default() };
    let engine = FieldEngine::new(bank.clone(), cfg)?;
    let n = 1usize << step_log2;
    let b = engine.field_trajectory(0.5, 0, 0.0, 1.0 / n as f64, n + 1)?;
    let ls = zero_level_set(&b, 1e-12, None, None)?;
    box_dimension(&ls.points, scales)
}

/// Median over replicates that have enough zeros for box counting.
pub fn brownian_median(bank: &Arc<KernelBank>, top_seed: u64, seeds: u32, step_log2: u32, scales: BoxScales) -> Result<Option<f64>> {
    let mut dims = Vec::new();
    for i in 0..seeds {
        if let Some(d) = brownian_zero_dimension(bank, replicate_seed(top_seed, "brownian", i), step_log2, scales)? {
            dims.push(d.dimension);
        }
    }
    Ok(median(&dims))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_synthetic_sets() {
        let full: Vec<f64> = (0..1000).map(|i| 1.0 + 0.8 * i as f64 / 999.0).collect();
        let sets = vec![full, vec![], vec![1.5; 3]];
        let r = dimension_summary(&sets, &HProfile::remark_preset(), (1.0, 1.875), 0.05, 0.15, BoxScales::new(8, 3)).unwrap();
        assert!((r.nonempty_fraction - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.median_dimension.unwrap() - 1.0).abs() < 0.1);
        assert!((r.bound - (0.95 - 1.0 / 3.0)).abs() < 1e-9);
        assert_eq!(r.pass, Some(true));
        assert!(dimension_summary(&[], &HProfile::remark_preset(), (1.0, 1.5), 0.05, 0.15, BoxScales::new(8, 3)).is_err());
    }
}
