use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mbmlab_core::experiments::{DichotomyConfig, DimensionConfig, EnergyConfig, DEFAULT_PAIRS};
use mbmlab_core::hoelder::HProfile;
use mbmlab_core::wavelet::SynthesisConfig;
use serde::{Deserialize, Serialize};

/// Everything a run needs, read from one TOML file and then overridden by flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// Directory holding the kernel tables; `<out>/tables` when unset.
    pub tables: Option<PathBuf>,
    pub synthesis: SynthesisConfig,
    pub simulate: SimulateConfig,
    pub verify: VerifyConfig,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            threads: None,
            tables: None,
            synthesis: SynthesisConfig::default(),
            simulate: SimulateConfig::default(),
            verify: VerifyConfig::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn tables_dir(&self) -> PathBuf {
        self.tables.clone().unwrap_or_else(|| self.out.join("tables"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub profile: HProfile,
    pub t0: f64,
    pub t1: f64,
    pub step_log2: u32,
    pub j_max: i32,
    pub tail_tol: f64,
    /// Also write the fBm path `B(., theta)` at this theta.
    pub theta: Option<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            profile: HProfile::remark_preset(),
            t0: 0.0,
            t1: 1.0,
            step_log2: 12,
            j_max: 14,
            tail_tol: 1e-6,
            theta: None,
        }
    }
}

impl SimulateConfig {
    pub fn validate(&self, theta_bounds: (f64, f64)) -> anyhow::Result<()> {
        self.profile.validate()?;
        if !(self.t0.is_finite() && self.t1 > self.t0) {
            bail!("simulate: need t0 < t1, got [{}, {}]", self.t0, self.t1);
        }
        if !(4..=20).contains(&self.step_log2) {
            bail!("simulate: step_log2 = {} outside 4..=20", self.step_log2);
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            bail!("simulate: tail_tol = {}", self.tail_tol);
        }
        let (lo, hi) = self.profile.range_on(self.t0, self.t1);
        let (a, b) = theta_bounds;
        if lo <= a || hi >= b {
            bail!("simulate: H ranges over [{lo:.4}, {hi:.4}] which leaves the theta bounds ({a}, {b})");
        }
        if let Some(theta) = self.theta {
            if !(a < theta && theta < b) {
                bail!("simulate: theta = {theta} outside ({a}, {b})");
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        let n = (self.t1 - self.t0) * 2f64.powi(self.step_log2 as i32);
        n.round() as usize + 1
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub profile: HProfile,
    pub interval: (f64, f64),
    pub floor_points: usize,
    pub lnd_tuples: usize,
    pub lnd_max_points: usize,
    pub det_pairs: usize,
    pub psd_tuples: usize,
    pub covariance_seeds: u32,
    pub covariance_thetas: Vec<f64>,
    pub covariance_pairs: Vec<(f64, f64)>,
    pub kernel_checks: bool,
    /// Multiplies the synthesis kernels before any check runs. Any value other than 1 is a
    /// deliberate fault used to test that the suite notices.
    pub kernel_scale: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            profile: HProfile::remark_preset(),
            interval: (1.0, 1.9),
            floor_points: 20,
            lnd_tuples: 200,
            lnd_max_points: 6,
            det_pairs: 10,
            psd_tuples: 20,
            covariance_seeds: 400,
            covariance_thetas: vec![0.3, 0.5, 0.7],
            covariance_pairs: DEFAULT_PAIRS.to_vec(),
            kernel_checks: true,
            kernel_scale: 1.0,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self, theta_bounds: (f64, f64)) -> anyhow::Result<()> {
        self.profile.validate()?;
        let (lo, hi) = self.interval;
        if !(0.0 < lo && lo < hi && hi < lo + 1.0) {
            bail!("verify: interval [{lo}, {hi}] must satisfy 0 < lo < hi < lo + 1");
        }
        if !(2..=12).contains(&self.lnd_max_points) {
            bail!("verify: lnd_max_points = {} outside 2..=12", self.lnd_max_points);
        }
        if self.covariance_seeds == 1 {
            bail!("verify: covariance_seeds must be 0 (skip) or at least 2");
        }
        let (a, b) = theta_bounds;
        if let Some(t) = self.covariance_thetas.iter().find(|&&t| !(a < t && t < b)) {
            bail!("verify: covariance theta {t} outside ({a}, {b})");
        }
        if self.covariance_pairs.iter().any(|&(t, s)| !(t.is_finite() && s.is_finite()) || t.abs().max(s.abs()) > 8.0) {
            bail!("verify: covariance pairs must lie in [-8, 8]");
        }
        if !(self.kernel_scale.is_finite() && self.kernel_scale > 0.0) {
            bail!("verify: kernel_scale = {}", self.kernel_scale);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub dichotomy: DichotomyConfig,
    pub dimension: DimensionConfig,
    pub energy: EnergyConfig,
}
