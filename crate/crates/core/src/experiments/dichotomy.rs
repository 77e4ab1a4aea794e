use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{median, replicate_seed, simulate, SimulationSpec};
use crate::error::{Error, Result};
use crate::hoelder::{check_conditions, exponent_target, HProfile, SmoothShape};
use crate::regularity::{pointwise_exponent, zero_level_set, ScaleRange};
use crate::wavelet::KernelBank;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DichotomyMode {
    /// Tent-series `H` satisfying condition (A) on `I`.
    Theorem,
    /// Smooth `H`, where both classes should show `min(H, alpha_H) = H`.
    Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DichotomyConfig {
    pub mode: DichotomyMode,
    pub profile: HProfile,
    pub simulation: SimulationSpec,
    pub seeds: u32,
    /// Near-zero band `|Y| <= band median |Y|` reported alongside the crossings.
    pub band: f64,
    /// Points estimated per class and seed.
    pub representatives: usize,
    pub refine_tol: f64,
    pub scales: ScaleRange,
    /// Largest accepted median `|alpha_hat - target|` per class.
    pub tolerance: f64,
    /// Fraction of seeds whose class medians must be ordered as predicted.
    pub separation_fraction: f64,
}

impl Default for DichotomyConfig {
    fn default() -> Self {
        DichotomyConfig {
            mode: DichotomyMode::Theorem,
            profile: HProfile::remark_preset(),
            simulation: SimulationSpec::default(),
            seeds: 20,
            band: 0.05,
            representatives: 16,
            refine_tol: 1e-9,
            scales: ScaleRange::pointwise_default(),
            tolerance: 0.08,
            separation_fraction: 0.8,
        }
    }
}

impl DichotomyConfig {
    /// The smooth-profile control run.
    pub fn control() -> Self {
        DichotomyConfig {
            mode: DichotomyMode::Control,
            profile: HProfile::Smooth { shape: SmoothShape::Sine { mean: 0.35, amplitude: 0.05, frequency: 1.0, phase: 0.0 } },
            ..DichotomyConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate()?;
        self.profile.validate()?;
        self.scales.validate()?;
        if !(self.band > 0.0 && self.band < 1.0) || self.representatives == 0 || self.seeds == 0 || !(self.refine_tol > 0.0) {
            return Err(Error::OutOfRange("band in (0, 1), positive representatives, seeds and refine_tol required".into()));
        }
        let i = self.simulation.interval;
        match self.mode {
            DichotomyMode::Theorem => {
                if check_conditions(&self.profile, i).condition_a != Some(true) {
                    return Err(Error::Condition(format!("condition (A) fails for {} on {i:?}", self.profile.describe())));
                }
            }
            DichotomyMode::Control => {
                if matches!(self.profile, HProfile::Takagi { .. }) {
                    return Err(Error::Condition("the control run needs a constant or smooth H".into()));
                }
            }
        }
        Ok(())
    }

    /// Exponent expected away from the zeros of `Y`.
    fn far_target(&self, s: f64) -> f64 {
        match self.mode {
            DichotomyMode::Theorem => exponent_target(&self.profile, s).unwrap_or(f64::NAN),
            DichotomyMode::Control => self.profile.eval(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointClass {
    Far,
    Crossing,
}

/// One CSV row: `s,class,alpha_hat,zeta,H,r2,half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub s: f64,
    pub class: PointClass,
    pub alpha_hat: f64,
    /// Declared `alpha_H(s)`; infinite for smooth profiles.
    pub zeta: f64,
    pub h: f64,
    pub r2: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomySeed {
    pub index: u32,
    pub seed: u64,
    pub median_abs_y: f64,
    pub band_threshold: f64,
    pub band_points: usize,
    /// All refined crossings of `Y` in `I`.
    pub crossings: Vec<f64>,
    pub rows: Vec<PointRow>,
    pub far_median: Option<f64>,
    pub crossing_median: Option<f64>,
    pub truncation_rms: Option<f64>,
}

impl DichotomySeed {
    /// Crossing estimates exceed far estimates, as `H > alpha_H` predicts.
    pub fn separated(&self) -> Option<bool> {
        Some(self.crossing_median? > self.far_median?)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,class,alpha_hat,zeta,H,r2,half_width")?;
        for r in &self.rows {
            let class = match r.class {
                PointClass::Far => "far",
                PointClass::Crossing => "crossing",
            };
            writeln!(w, "{:.12},{class},{:.6},{:.6},{:.6},{:.6},{:.6}", r.s, r.alpha_hat, r.zeta, r.h, r.r2, r.half_width)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub config: DichotomyConfig,
    pub top_seed: u64,
    pub seeds: Vec<DichotomySeed>,
    /// Median of `|alpha_hat - target|` over all far points.
    pub far_median_error: Option<f64>,
    /// Median of `|alpha_hat - H(s)|` over all crossing points.
    pub crossing_median_error: Option<f64>,
    /// Seeds where both classes are present and ordered as predicted.
    pub separated_seeds: usize,
    pub seeds_with_crossings: usize,
}

impl DichotomyReport {
    /// Both class errors within tolerance and, in theorem mode, enough separated seeds.
    pub fn pass(&self) -> bool {
        let tol = self.config.tolerance;
        let far = self.far_median_error.is_some_and(|e| e <= tol);
        let crossing = match self.config.mode {
            DichotomyMode::Theorem => self.crossing_median_error.is_some_and(|e| e <= tol),
            DichotomyMode::Control => self.crossing_median_error.is_none_or(|e| e <= tol),
        };
        let separated = match self.config.mode {
            DichotomyMode::Theorem => self.separated_seeds as f64 >= self.config.separation_fraction * self.seeds.len() as f64,
            DichotomyMode::Control => true,
        };
        far && crossing && separated
    }
}

fn evenly<T: Copy>(xs: &[T], k: usize) -> Vec<T> {
    if xs.len() <= k {
        return xs.to_vec();
    }
    (0..k).map(|i| xs[(2 * i + 1) * xs.len() / (2 * k)]).collect()
}

fn run_seed(bank: &Arc<KernelBank>, cfg: &DichotomyConfig, top_seed: u64, index: u32) -> Result<DichotomySeed> {
    let seed = replicate_seed(top_seed, "dichotomy", index);
    let real = simulate(bank, &cfg.simulation, &cfg.profile, seed)?;
    let (a, b) = cfg.simulation.interval;
    let (i0, i1) = real.y.index_range(a, b).ok_or_else(|| Error::OutOfRange("interval outside the grid".into()))?;
    let ys = &real.y.values[i0..=i1];
    let abs: Vec<f64> = ys.iter().map(|v| v.abs()).collect();
    let med = median(&abs).unwrap_or(0.0);
    let band_threshold = cfg.band * med;
    let far_idx: Vec<usize> = (i0..=i1).filter(|&i| real.y.values[i].abs() >= med).collect();

    let profile = cfg.profile;
    let eval = |s: f64| real.engine.eval_y(&profile, s).unwrap_or(f64::NAN);
    let ls = zero_level_set(&real.y, cfg.refine_tol, Some(&eval), None)?;
    let crossings: Vec<f64> = ls.points.into_iter().filter(|&s| s >= a && s <= b).collect();

    let mut picks: Vec<(f64, PointClass)> =
        evenly(&far_idx, cfg.representatives).into_iter().map(|i| (real.x.t(i), PointClass::Far)).collect();
    picks.extend(evenly(&crossings, cfg.representatives).into_iter().map(|s| (s, PointClass::Crossing)));
    let rows = picks
        .par_iter()
        .map(|&(s, class)| {
            let e = pointwise_exponent(&real.x, s, &cfg.scales)?;
            let zeta = match cfg.mode {
                DichotomyMode::Theorem => cfg.far_target(s),
                DichotomyMode::Control => f64::INFINITY,
            };
            Ok(PointRow { s, class, alpha_hat: e.value, zeta, h: profile.eval(s), r2: e.r2, half_width: e.half_width })
        })
        .collect::<Result<Vec<_>>>()?;
    let class_median =
        |c: PointClass| median(&rows.iter().filter(|r| r.class == c).map(|r| r.alpha_hat).collect::<Vec<_>>());
    Ok(DichotomySeed {
        index,
        seed,
        median_abs_y: med,
        band_threshold,
        band_points: abs.iter().filter(|&&v| v <= band_threshold).count(),
        crossings,
        far_median: class_median(PointClass::Far),
        crossing_median: class_median(PointClass::Crossing),
        rows,
        truncation_rms: real.engine.truncation_bound_for(profile.range_on(a, b), 1).ok().map(|t| t.rms),
    })
}

/// Simulates `X` and `Y` for each replicate, classifies points of `I` by their distance to the
/// zeros of `Y` and estimates pointwise exponents at representatives of each class.
pub fn run_dichotomy(bank: &Arc<KernelBank>, cfg: &DichotomyConfig, top_seed: u64) -> Result<DichotomyReport> {
    cfg.validate()?;
    let seeds = (0..cfg.seeds).map(|i| run_seed(bank, cfg, top_seed, i)).collect::<Result<Vec<_>>>()?;
    let errors = |class: PointClass, target: &dyn Fn(&PointRow) -> f64| {
        let e: Vec<f64> =
            seeds.iter().flat_map(|s| s.rows.iter()).filter(|r| r.class == class).map(|r| (r.alpha_hat - target(r)).abs()).collect();
        median(&e)
    };
    let far_median_error = errors(PointClass::Far, &|r| cfg.far_target(r.s));
    let crossing_median_error = errors(PointClass::Crossing, &|r| r.h);
    Ok(DichotomyReport {
        far_median_error,
        crossing_median_error,
        separated_seeds: seeds.iter().filter(|s| s.separated() == Some(true)).count(),
        seeds_with_crossings: seeds.iter().filter(|s| !s.crossings.is_empty()).count(),
        config: cfg.clone(),
        top_seed,
        seeds,
    })
}
