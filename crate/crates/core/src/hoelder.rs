//! Functional Hurst parameters: constants, smooth shapes and the tent-series profile with a
//! prescribed pointwise exponent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Admissible band for the prescribed exponent of the tent-series profile.
pub const ZETA_BAND: (f64, f64) = (0.25, 7.0 / 24.0);
/// Range of the tent-series profile.
pub const TAKAGI_RANGE: (f64, f64) = (1.0 / 3.0, 0.4);
pub const DEFAULT_TAKAGI_JMAX: u32 = 28;

/// `1 - |2x - 1|` on `[0, 1]`, zero elsewhere.
pub fn tent<R: Real>(x: R) -> R {
    if x < R::zero() || x > R::one() {
        R::zero()
    } else {
        R::one() - (R::c(2.0) * x - R::one()).abs()
    }
}

fn takagi_prefactor() -> f64 {
    (1.0 - 2f64.powf(-0.25)) / 15.0
}

/// Exponent function presets for the tent series, evaluated on `s - floor(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum ZetaPreset {
    Constant { value: f64 },
    /// `lo + (hi - lo) s` on `[0, 1)`.
    Affine { lo: f64, hi: f64 },
    /// `mean + amplitude cos(2 pi s)`.
    Cosine { mean: f64, amplitude: f64 },
}

impl ZetaPreset {
    pub fn eval<R: Real>(&self, s: R) -> R {
        let u = s - s.floor();
        match *self {
            ZetaPreset::Constant { value } => R::c(value),
            ZetaPreset::Affine { lo, hi } => R::c(lo) + R::c(hi - lo) * u,
            ZetaPreset::Cosine { mean, amplitude } => R::c(mean) + R::c(amplitude) * (R::c(2.0) * R::PI() * u).cos(),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ZetaPreset::Constant { value } => (value, value),
            ZetaPreset::Affine { lo, hi } => (lo.min(hi), lo.max(hi)),
            ZetaPreset::Cosine { mean, amplitude } => (mean - amplitude.abs(), mean + amplitude.abs()),
        }
    }

    /// Largest `|zeta'|`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            ZetaPreset::Constant { .. } => 0.0,
            ZetaPreset::Affine { lo, hi } => (hi - lo).abs(),
            ZetaPreset::Cosine { amplitude, .. } => 2.0 * std::f64::consts::PI * amplitude.abs(),
        }
    }

    /// The range of the preset lies in `[1/4, 7/24]`.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        let eps = 1e-12;
        if lo < ZETA_BAND.0 - eps || hi > ZETA_BAND.1 + eps {
            return Err(Error::OutOfRange(format!("zeta range [{lo}, {hi}] leaves [1/4, 7/24]")));
        }
        Ok(())
    }

    /// The preset is continuous across integers (`zeta(0) = zeta(1)`).
    pub fn is_periodic(&self) -> bool {
        !matches!(self, ZetaPreset::Affine { lo, hi } if lo != hi)
    }
}

/// Smooth Hurst shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum SmoothShape {
    /// `h0 + slope s`.
    Affine { h0: f64, slope: f64 },
    /// `mean + amplitude sin(2 pi frequency s + phase)`.
    Sine { mean: f64, amplitude: f64, frequency: f64, #[serde(default)] phase: f64 },
}

/// Functional Hurst parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HProfile {
    Constant { value: f64 },
    Smooth { shape: SmoothShape },
    /// 1-periodic tent series with pointwise exponent `zeta`.
    Takagi {
        zeta: ZetaPreset,
        #[serde(default = "default_jmax")]
        j_max: u32,
    },
}

fn default_jmax() -> u32 {
    DEFAULT_TAKAGI_JMAX
}

/// Truncated tent series with its declared truncation error.
pub fn takagi_h<R: Real, Z: Fn(R) -> R>(zeta: Z, s: R, j_max: u32) -> R {
    let u = s - s.floor();
    let mut acc = R::zero();
    let mut scale = R::one();
    for _ in 0..=j_max {
        let x = scale * u;
        let k = x.floor();
        let t = tent(x - k);
        if t > R::zero() {
            let z = zeta(k / scale);
            acc = acc + scale.powf(-z) * t;
        }
        scale = scale * R::c(2.0);
    }
    R::c(1.0 / 3.0) + R::c(takagi_prefactor()) * acc
}

/// Bound on the terms of the tent series beyond `j_max` when `zeta >= zeta_min`.
pub fn takagi_truncation_bound(zeta_min: f64, j_max: u32) -> f64 {
    let r = 2f64.powf(-zeta_min);
    takagi_prefactor() * r.powi(j_max as i32 + 1) / (1.0 - r)
}

impl HProfile {
    pub fn takagi(zeta: ZetaPreset) -> Result<Self> {
        zeta.validate()?;
        Ok(HProfile::Takagi { zeta, j_max: DEFAULT_TAKAGI_JMAX })
    }

    /// The profile used by the dichotomy experiments: `zeta` affine from 1/4 to 7/24.
    pub fn remark_preset() -> Self {
        HProfile::Takagi { zeta: ZetaPreset::Affine { lo: ZETA_BAND.0, hi: ZETA_BAND.1 }, j_max: DEFAULT_TAKAGI_JMAX }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HProfile::Constant { value } => {
                if !(*value > 0.0 && *value < 1.0) {
                    return Err(Error::OutOfRange(format!("constant H = {value} outside (0, 1)")));
                }
            }
            HProfile::Smooth { shape } => {
                if let SmoothShape::Sine { mean, amplitude, .. } = shape {
                    if mean - amplitude.abs() <= 0.0 || mean + amplitude.abs() >= 1.0 {
                        return Err(Error::OutOfRange("sine profile leaves (0, 1)".into()));
                    }
                }
            }
            HProfile::Takagi { zeta, j_max } => {
                zeta.validate()?;
                if *j_max < 20 {
                    return Err(Error::OutOfRange(format!("j_max = {j_max} < 20")));
                }
            }
        }
        Ok(())
    }

    pub fn eval<R: Real>(&self, s: R) -> R {
        match *self {
            HProfile::Constant { value } => R::c(value),
            HProfile::Smooth { shape: SmoothShape::Affine { h0, slope } } => R::c(h0) + R::c(slope) * s,
            HProfile::Smooth { shape: SmoothShape::Sine { mean, amplitude, frequency, phase } } => {
                R::c(mean) + R::c(amplitude) * (R::c(2.0) * R::PI() * R::c(frequency) * s + R::c(phase)).sin()
            }
            HProfile::Takagi { zeta, j_max } => takagi_h(|x| zeta.eval(x), s, j_max),
        }
    }

    /// Range of the profile over `[a, b]`: exact for constants and sines, sampled otherwise
    /// (the tent series uses its declared range).
    pub fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        match *self {
            HProfile::Constant { value } => (value, value),
            HProfile::Smooth { shape: SmoothShape::Affine { h0, slope } } => {
                let (x, y) = (h0 + slope * a, h0 + slope * b);
                (x.min(y), x.max(y))
            }
            HProfile::Smooth { .. } | HProfile::Takagi { .. } => {
                let n = 4096;
                (0..=n).map(|i| self.eval(a + (b - a) * i as f64 / n as f64)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                })
            }
        }
    }

    /// Declared truncation error of the evaluation (zero except for the tent series).
    pub fn truncation_bound(&self) -> f64 {
        match *self {
            HProfile::Takagi { zeta, j_max } => takagi_truncation_bound(zeta.bounds().0, j_max),
            _ => 0.0,
        }
    }

    /// Short human-readable descriptor.
    pub fn describe(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

/// Declared pointwise exponent `alpha_H(s) = zeta(s)` of a tent-series profile.
pub fn exponent_target<R: Real>(profile: &HProfile, s: R) -> Result<R> {
    match profile {
        HProfile::Takagi { zeta, .. } => Ok(zeta.eval(s)),
        _ => Err(Error::OutOfRange("only the tent-series profile has a finite declared exponent".into())),
    }
}

/// Outcome of the regularity-condition checks; `None` marks an indeterminate check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conditions {
    pub condition_a: Option<bool>,
    pub condition_us_h: Option<bool>,
}

/// `alpha(s) < H(s) < 2 alpha(s)` on `n + 1` equispaced points of `[a, b]`.
pub fn check_condition_a<R: Real>(h: impl Fn(R) -> R, alpha: impl Fn(R) -> R, (a, b): (R, R), n: usize) -> bool {
    (0..=n).all(|i| {
        let s = a + (b - a) * R::c(i as f64 / n as f64);
        let (hv, av) = (h(s), alpha(s));
        av < hv && hv < R::c(2.0) * av
    })
}

/// Condition (A) and the uniform-regularity condition `max H < beta_H` over `[a, b]`.
pub fn check_conditions(profile: &HProfile, (a, b): (f64, f64)) -> Conditions {
    const N: usize = 1 << 14;
    match profile {
        HProfile::Constant { .. } | HProfile::Smooth { .. } => {
            // alpha_H is infinite, so alpha_H < H fails while max H < beta_H holds
            Conditions { condition_a: Some(false), condition_us_h: Some(true) }
        }
        HProfile::Takagi { zeta, .. } => {
            let cond_a = check_condition_a(|s: f64| profile.eval(s), |s| zeta.eval(s), (a, b), N);
            let grid: Vec<f64> = (0..=N).map(|i| profile.eval(a + (b - a) * i as f64 / N as f64)).collect();
            let h_max = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let step = (b - a) / N as f64;
            let est = crate::regularity::uniform_exponent_values(&grid, step, &crate::regularity::ScaleRange::uniform_default());
            let cond_us = est.ok().map(|e| h_max < e.value);
            Conditions { condition_a: Some(cond_a), condition_us_h: cond_us }
        }
    }
}
