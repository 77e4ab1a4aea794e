use serde::{Deserialize, Serialize};

use super::estimate::{clamp_exponent, least_squares};
use crate::error::{Error, Result};
use crate::trajectory::TrajectoryGrid;

/// Minimum number of trajectories in an empirical ensemble.
pub const ENSEMBLE_MIN_SEEDS: usize = 500;

/// Second moments `E|X(t) - X(u)|^2`.
pub trait IncrementMoments {
    fn increment_variance(&self, t: f64, u: f64) -> f64;
}

/// Moments given in closed form or by a quadrature oracle.
pub struct ExactMoments<F>(pub F);

impl<F: Fn(f64, f64) -> f64> IncrementMoments for ExactMoments<F> {
    fn increment_variance(&self, t: f64, u: f64) -> f64 {
        (self.0)(t, u)
    }
}

/// Empirical moments over trajectories sampled on a common grid.
pub struct Ensemble<'a> {
    trajectories: &'a [TrajectoryGrid<f64>],
}

impl<'a> Ensemble<'a> {
    pub fn new(trajectories: &'a [TrajectoryGrid<f64>]) -> Result<Self> {
        if trajectories.len() < ENSEMBLE_MIN_SEEDS {
            return Err(Error::Insufficient(format!(
                "{} trajectories, need {ENSEMBLE_MIN_SEEDS}",
                trajectories.len()
            )));
        }
        let first = &trajectories[0];
        if trajectories.iter().any(|t| t.len() != first.len() || t.t0 != first.t0 || t.step != first.step) {
            return Err(Error::OutOfRange("ensemble trajectories use different grids".into()));
        }
        Ok(Ensemble { trajectories })
    }
}

impl IncrementMoments for Ensemble<'_> {
    fn increment_variance(&self, t: f64, u: f64) -> f64 {
        let g = &self.trajectories[0];
        let (Some(i), Some(k)) = (g.nearest(t), g.nearest(u)) else { return f64::NAN };
        let sum: f64 = self.trajectories.iter().map(|tr| (tr.values[i] - tr.values[k]).powi(2)).sum();
        sum / self.trajectories.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSquareExponents {
    /// Mean-square exponent of the interval.
    pub b_interval: f64,
    /// Mean-square exponent at the point, as the value over the smallest neighbourhood.
    pub a_local: f64,
    /// `(radius, exponent)` over the shrinking neighbourhoods of the point.
    pub neighbourhoods: Vec<(f64, f64)>,
}

/// Half the log-log slope of `max_t E|X(t + h) - X(t)|^2` against `h`, over `levels` dyadic
/// lags below a quarter of the interval length, with `anchors` base points per lag.
pub fn meansquare_exponent<M: IncrementMoments + ?Sized>(m: &M, (a, b): (f64, f64), levels: u32, anchors: usize) -> Result<f64> {
    if !(b > a) || levels < 3 || anchors < 2 {
        return Err(Error::OutOfRange("need a proper interval, three lags and two anchors".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..levels {
        let h = 0.25 * (b - a) * 0.5f64.powi(i as i32);
        let v = (0..anchors)
            .map(|k| a + (b - a - h) * k as f64 / (anchors - 1) as f64)
            .map(|t| m.increment_variance(t + h, t))
            .fold(0.0, f64::max);
        if v > 0.0 && v.is_finite() {
            xs.push(h.ln());
            ys.push(v.ln());
        }
    }
    let fit = least_squares(&xs, &ys).ok_or_else(|| Error::Insufficient("no usable lags".into()))?;
    Ok(clamp_exponent(0.5 * fit.slope))
}

/// Interval exponent on `J` and the limit of neighbourhood exponents at `s` over radii
/// `r0, r0 / 2, ...` (`shrink` steps).
pub fn meansquare_exponents<M: IncrementMoments + ?Sized>(
    m: &M,
    j: (f64, f64),
    s: f64,
    r0: f64,
    shrink: u32,
    levels: u32,
) -> Result<MeanSquareExponents> {
    let anchors = 33;
    let b_interval = meansquare_exponent(m, j, levels, anchors)?;
    let mut neighbourhoods = Vec::new();
    let mut r = r0;
    for _ in 0..shrink.max(1) {
        neighbourhoods.push((r, meansquare_exponent(m, (s - r, s + r), levels, anchors)?));
        r *= 0.5;
    }
    let a_local = neighbourhoods.last().unwrap().1;
    Ok(MeanSquareExponents { b_interval, a_local, neighbourhoods })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fbm_closed_form() {
        let theta = 0.35;
        let m = ExactMoments(|t: f64, u: f64| (t - u).abs().powf(2.0 * theta));
        let b = meansquare_exponent(&m, (0.0, 1.0), 8, 17).unwrap();
        assert!((b - theta).abs() < 1e-3);
    }

    #[test]
    fn varying_exponent_takes_the_worst_point() {
        // locally fBm with exponent h(t) = 0.3 + 0.4 t
        let h = |t: f64| 0.3 + 0.4 * t;
        let m = ExactMoments(move |t: f64, u: f64| (t - u).abs().powf(2.0 * h(0.5 * (t + u))));
        let r = meansquare_exponents(&m, (0.0, 1.0), 0.5, 0.25, 5, 8).unwrap();
        assert!(r.b_interval < 0.36, "{}", r.b_interval);
        assert!((r.a_local - 0.5).abs() < 0.03, "{}", r.a_local);
    }

    #[test]
    fn small_ensemble_rejected() {
        let g = TrajectoryGrid::from_fn(0.0, 0.1, 11, |t: f64| t).unwrap();
        let v = vec![g; 10];
        assert!(Ensemble::new(&v).is_err());
    }
}
