use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Reported exponents are clamped to `[0, EXPONENT_CAP]`.
pub const EXPONENT_CAP: f64 = 1.2;

/// Dyadic regression scales `rho = 2^-finest ..= 2^-coarsest`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleRange {
    pub finest: i32,
    pub coarsest: i32,
    /// Power `c` of the `log(1 + |J| / rho)` factor divided out of the oscillations.
    #[serde(default)]
    pub log_correction: f64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default)]
    pub bootstrap_seed: u64,
}

fn default_resamples() -> usize {
    200
}

impl ScaleRange {
    pub fn new(finest: i32, coarsest: i32) -> Self {
        ScaleRange { finest, coarsest, log_correction: 0.0, bootstrap_resamples: default_resamples(), bootstrap_seed: 0 }
    }

    /// Default for uniform exponents: `2^-12 ..= 2^-4` with the modulus-of-continuity correction.
    pub fn uniform_default() -> Self {
        ScaleRange { log_correction: UNIFORM_LOG_CORRECTION, ..ScaleRange::new(12, 4) }
    }

    /// Default for pointwise exponents: `2^-12 ..= 2^-3`, so that a unit grid of `2^14`
    /// points holds `2^12` samples within the largest radius.
    pub fn pointwise_default() -> Self {
        ScaleRange { log_correction: POINTWISE_LOG_CORRECTION, ..ScaleRange::new(12, 3) }
    }

    pub fn with_correction(mut self, c: f64) -> Self {
        self.log_correction = c;
        self
    }

    pub fn rhos(&self) -> Vec<f64> {
        (self.coarsest..=self.finest).rev().map(|i| 2f64.powi(-i)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.finest <= self.coarsest || self.finest - self.coarsest < 2 {
            return Err(Error::OutOfRange(format!(
                "scale range 2^-{}..2^-{} needs at least three scales",
                self.finest, self.coarsest
            )));
        }
        Ok(())
    }
}

/// Default power of the logarithmic correction for uniform exponents. Calibrated on exact
/// fBm paths of `2^14` points, `theta` in 0.3..0.7.
pub const UNIFORM_LOG_CORRECTION: f64 = 0.25;
/// Correction for pointwise exponents. Negative: a sup over few grid samples falls short of
/// the continuous sup, which steepens the fine end of the regression.
pub const POINTWISE_LOG_CORRECTION: f64 = -0.2;
/// Correction for the uniform fits inside local exponents.
pub const LOCAL_LOG_CORRECTION: f64 = 0.1;

/// Exponent with regression diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentEstimate<R> {
    pub value: R,
    pub raw_slope: R,
    pub scale_range: (R, R),
    pub r2: R,
    pub half_width: R,
    pub n_scales: usize,
}

pub(crate) struct Fit<R> {
    pub slope: R,
    pub intercept: R,
    pub r2: R,
}

pub(crate) fn least_squares<R: Real>(x: &[R], y: &[R]) -> Option<Fit<R>> {
    let n = R::c(x.len() as f64);
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().fold(R::zero(), |a, &b| a + b) / n;
    let my = y.iter().fold(R::zero(), |a, &b| a + b) / n;
    let mut sxx = R::zero();
    let mut sxy = R::zero();
    let mut syy = R::zero();
    for (&a, &b) in x.iter().zip(y) {
        sxx = sxx + (a - mx) * (a - mx);
        sxy = sxy + (a - mx) * (b - my);
        syy = syy + (b - my) * (b - my);
    }
    if sxx <= R::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy > R::zero() { (sxy * sxy) / (sxx * syy) } else { R::one() };
    Some(Fit { slope, intercept: my - slope * mx, r2 })
}

pub(crate) fn clamp_exponent<R: Real>(v: R) -> R {
    if v.is_nan() {
        return R::c(EXPONENT_CAP);
    }
    v.max(R::zero()).min(R::c(EXPONENT_CAP))
}

pub(crate) fn percentile_half_width(mut xs: Vec<f64>) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| {
        let pos = p * (xs.len() - 1) as f64;
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        xs[i] * (1.0 - f) + xs[(i + 1).min(xs.len() - 1)] * f
    };
    0.5 * (q(0.975) - q(0.025))
}

/// Log-log points of oscillation against scale, after the optional log correction.
/// Non-positive oscillations are dropped.
pub(crate) struct LogLog<R> {
    pub xs: Vec<R>,
    pub ys: Vec<R>,
    pub rho_lo: f64,
    pub rho_hi: f64,
}

impl<R: Real> LogLog<R> {
    pub fn new(rhos: &[f64], osc: &[R], correction: f64, span: f64) -> Self {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (&r, &o) in rhos.iter().zip(osc) {
            if o > R::zero() && o.is_finite() {
                xs.push(R::c(r.ln()));
                ys.push(o.ln() - R::c(correction * (1.0 + span / r).ln().ln()));
            }
        }
        let rho_lo = rhos.iter().cloned().fold(f64::INFINITY, f64::min);
        let rho_hi = rhos.iter().cloned().fold(0.0, f64::max);
        LogLog { xs, ys, rho_lo, rho_hi }
    }

    /// Slope estimate; fewer than two usable scales means the input is locally constant and
    /// the cap is reported.
    pub fn estimate(&self) -> ExponentEstimate<R> {
        let range = (R::c(self.rho_lo), R::c(self.rho_hi));
        match least_squares(&self.xs, &self.ys) {
            Some(fit) => ExponentEstimate {
                value: clamp_exponent(fit.slope),
                raw_slope: fit.slope,
                scale_range: range,
                r2: fit.r2,
                half_width: R::zero(),
                n_scales: self.xs.len(),
            },
            None => ExponentEstimate {
                value: R::c(EXPONENT_CAP),
                raw_slope: R::infinity(),
                scale_range: range,
                r2: R::one(),
                half_width: R::zero(),
                n_scales: self.xs.len(),
            },
        }
    }

    /// 95% half-width of the slope when regression residuals are resampled.
    pub fn residual_bootstrap(&self, resamples: usize, seed: u64) -> R {
        let Some(fit) = least_squares(&self.xs, &self.ys) else { return R::zero() };
        if self.xs.len() < 3 || resamples == 0 {
            return R::zero();
        }
        let fitted: Vec<R> = self.xs.iter().map(|&x| fit.intercept + fit.slope * x).collect();
        let resid: Vec<R> = self.ys.iter().zip(&fitted).map(|(&y, &f)| y - f).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slopes: Vec<f64> = (0..resamples)
            .filter_map(|_| {
                let ys: Vec<R> = fitted.iter().map(|&f| f + resid[rng.gen_range(0..resid.len())]).collect();
                least_squares(&self.xs, &ys).map(|f| f.slope.f64())
            })
            .collect();
        R::c(percentile_half_width(slopes))
    }
}
