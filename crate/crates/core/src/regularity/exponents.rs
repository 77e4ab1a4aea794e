use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::estimate::{percentile_half_width, ExponentEstimate, LogLog, ScaleRange};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::trajectory::TrajectoryGrid;

/// Minimum number of samples in the interval for a uniform exponent.
pub const UNIFORM_MIN_POINTS: usize = 1 << 10;
/// Minimum number of samples within the largest radius for a pointwise exponent.
pub const POINTWISE_MIN_POINTS: usize = 1 << 12;

/// `max_i (max - min)` over windows of `w + 1` consecutive samples.
pub(crate) fn window_range<R: Real>(x: &[R], w: usize) -> R {
    if w == 0 || x.len() < 2 {
        return R::zero();
    }
    let w = w.min(x.len() - 1);
    let mut maxq: VecDeque<usize> = VecDeque::new();
    let mut minq: VecDeque<usize> = VecDeque::new();
    let mut best = R::zero();
    for i in 0..x.len() {
        while maxq.back().is_some_and(|&j| x[j] <= x[i]) {
            maxq.pop_back();
        }
        maxq.push_back(i);
        while minq.back().is_some_and(|&j| x[j] >= x[i]) {
            minq.pop_back();
        }
        minq.push_back(i);
        if i >= w {
            let start = i - w;
            while maxq.front().is_some_and(|&j| j < start) {
                maxq.pop_front();
            }
            while minq.front().is_some_and(|&j| j < start) {
                minq.pop_front();
            }
            best = best.max(x[*maxq.front().unwrap()] - x[*minq.front().unwrap()]);
        }
    }
    best
}

fn windows_for(rhos: &[f64], step: f64) -> Vec<usize> {
    rhos.iter().map(|r| ((r / step).round() as usize).max(1)).collect()
}

/// `window_range` for every window in `ws`; power-of-two windows share one doubling pass.
fn window_ranges<R: Real>(x: &[R], ws: &[usize]) -> Vec<R> {
    if x.len() < 2 || !ws.iter().all(|w| w.is_power_of_two()) {
        return ws.iter().map(|&w| window_range(x, w)).collect();
    }
    let wmax = ws.iter().copied().max().unwrap_or(1).min(x.len() - 1);
    // hi[i], lo[i]: extremes of x[i..=i + w] for the current w
    let mut hi: Vec<R> = x.windows(2).map(|p| p[0].max(p[1])).collect();
    let mut lo: Vec<R> = x.windows(2).map(|p| p[0].min(p[1])).collect();
    let mut w = 1usize;
    let mut by_width = vec![(1usize, range_of(&hi, &lo))];
    while 2 * w <= wmax {
        let n = hi.len() - w;
        for i in 0..n {
            hi[i] = hi[i].max(hi[i + w]);
            lo[i] = lo[i].min(lo[i + w]);
        }
        hi.truncate(n);
        lo.truncate(n);
        w *= 2;
        by_width.push((w, range_of(&hi, &lo)));
    }
    ws.iter()
        .map(|&w| match by_width.iter().find(|(bw, _)| *bw == w) {
            Some((_, r)) => *r,
            None => window_range(x, w),
        })
        .collect()
}

fn range_of<R: Real>(hi: &[R], lo: &[R]) -> R {
    hi.iter().zip(lo).fold(R::zero(), |a, (&h, &l)| a.max(h - l))
}

fn uniform_loglog<R: Real>(values: &[R], step: f64, scales: &ScaleRange) -> Result<LogLog<R>> {
    scales.validate()?;
    if values.len() < UNIFORM_MIN_POINTS {
        return Err(Error::Insufficient(format!("{} samples, need {UNIFORM_MIN_POINTS}", values.len())));
    }
    let span = step * (values.len() - 1) as f64;
    let rhos = scales.rhos();
    if rhos.iter().cloned().fold(0.0, f64::max) > span {
        return Err(Error::OutOfRange(format!("largest scale exceeds the interval length {span}")));
    }
    let osc = window_ranges(values, &windows_for(&rhos, step));
    Ok(LogLog::new(&rhos, &osc, scales.log_correction, span))
}

/// Uniform exponent of samples with spacing `step`, without resampling.
pub fn uniform_exponent_values<R: Real>(values: &[R], step: f64, scales: &ScaleRange) -> Result<ExponentEstimate<R>> {
    Ok(uniform_loglog(values, step, scales)?.estimate())
}

/// Moving-block bootstrap of the uniform exponent: increments are resampled in blocks as
/// long as the coarsest window and re-summed into a path.
fn block_bootstrap<R: Real>(values: &[R], step: f64, scales: &ScaleRange) -> R {
    if scales.bootstrap_resamples == 0 {
        return R::zero();
    }
    let inc: Vec<R> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let rhos = scales.rhos();
    let block = windows_for(&rhos, step).into_iter().max().unwrap_or(1).min(inc.len());
    let starts = inc.len() - block + 1;
    let slopes: Vec<f64> = (0..scales.bootstrap_resamples)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(scales.bootstrap_seed ^ 0xb007);
            rng.set_stream(b as u64);
            let mut path = vec![R::zero(); values.len()];
            let mut acc = R::zero();
            let mut i = 1;
            while i < path.len() {
                let s = rng.gen_range(0..starts);
                for d in &inc[s..s + block] {
                    if i >= path.len() {
                        break;
                    }
                    acc = acc + *d;
                    path[i] = acc;
                    i += 1;
                }
            }
            uniform_loglog(&path, step, scales).ok().map(|ll| ll.estimate().raw_slope.f64()).filter(|v| v.is_finite())
        })
        .collect();
    R::c(percentile_half_width(slopes))
}

/// Uniform Hölder exponent over `[a, b]`: slope of the log oscillation against log scale,
/// with a moving-block bootstrap half-width.
pub fn uniform_exponent<R: Real>(traj: &TrajectoryGrid<R>, (a, b): (R, R), scales: &ScaleRange) -> Result<ExponentEstimate<R>> {
    if !(b > a) {
        return Err(Error::OutOfRange(format!("degenerate interval [{a:?}, {b:?}]")));
    }
    let (i0, i1) = traj.index_range(a, b).ok_or_else(|| Error::OutOfRange("interval outside the grid".into()))?;
    let vals = &traj.values[i0..=i1];
    let step = traj.step.f64();
    let mut est = uniform_exponent_values(vals, step, scales)?;
    est.half_width = block_bootstrap(vals, step, scales);
    Ok(est)
}

/// Pointwise Hölder exponent at `s`: slope of `log sup_{|h| <= rho} |X(s + h) - X(s)|`.
pub fn pointwise_exponent<R: Real>(traj: &TrajectoryGrid<R>, s: R, scales: &ScaleRange) -> Result<ExponentEstimate<R>> {
    scales.validate()?;
    let is = traj.nearest(s).ok_or_else(|| Error::OutOfRange(format!("s = {s:?} outside the grid")))?;
    let step = traj.step.f64();
    let rhos = scales.rhos();
    let ws = windows_for(&rhos, step);
    let wmax = *ws.iter().max().unwrap();
    if 2 * wmax < POINTWISE_MIN_POINTS {
        return Err(Error::Insufficient(format!(
            "only {} samples within the largest radius, need {POINTWISE_MIN_POINTS}",
            2 * wmax
        )));
    }
    if is < wmax || is + wmax >= traj.len() {
        return Err(Error::OutOfRange(format!("s = {s:?} too close to the grid boundary")));
    }
    let x = &traj.values;
    let xs = x[is];
    // running sup of |X(s + h) - X(s)| as |h| grows
    let mut run = vec![R::zero(); wmax + 1];
    for d in 1..=wmax {
        run[d] = run[d - 1].max((x[is + d] - xs).abs()).max((x[is - d] - xs).abs());
    }
    let osc: Vec<R> = ws.iter().map(|&w| run[w]).collect();
    let ll = LogLog::new(&rhos, &osc, scales.log_correction, 2.0 * rhos.iter().cloned().fold(0.0, f64::max));
    let mut est = ll.estimate();
    est.half_width = ll.residual_bootstrap(scales.bootstrap_resamples, scales.bootstrap_seed);
    Ok(est)
}

/// Local Hölder exponent at `s`: uniform exponents over shrinking intervals `[s - r, s + r]`,
/// reported as the median over the three smallest admissible radii. The half-width is half
/// the spread of those three values.
pub fn local_exponent<R: Real>(traj: &TrajectoryGrid<R>, s: R, correction: f64) -> Result<ExponentEstimate<R>> {
    let is = traj.nearest(s).ok_or_else(|| Error::OutOfRange(format!("s = {s:?} outside the grid")))?;
    let step = traj.step.f64();
    let room = is.min(traj.len() - 1 - is) as f64 * step;
    let mut r = 0.5f64;
    while r > room {
        r *= 0.5;
    }
    let finest_limit = (-(4.0 * step).log2()).floor() as i32;
    let mut ests = Vec::new();
    while 2.0 * r / step >= UNIFORM_MIN_POINTS as f64 {
        let coarsest = -(r / 2.0).log2().round() as i32;
        let finest = (coarsest + 8).min(finest_limit);
        if finest - coarsest >= 3 {
            let (i0, i1) = (is - (r / step).round() as usize, is + (r / step).round() as usize);
            let sc = ScaleRange::new(finest, coarsest).with_correction(correction);
            ests.push(uniform_exponent_values(&traj.values[i0..=i1], step, &sc)?);
        }
        r *= 0.5;
    }
    if ests.is_empty() {
        return Err(Error::Insufficient("grid too coarse for any bracketing interval".into()));
    }
    let tail = &ests[ests.len().saturating_sub(3)..];
    let mut vals: Vec<R> = tail.iter().map(|e| e.value).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = vals[vals.len() / 2];
    let last = tail.last().unwrap();
    Ok(ExponentEstimate {
        value: mid,
        raw_slope: mid,
        scale_range: (last.scale_range.0, tail[0].scale_range.1),
        r2: tail.iter().map(|e| e.r2).fold(R::one(), |a, b| a.min(b)),
        half_width: (vals[vals.len() - 1] - vals[0]) * R::c(0.5),
        n_scales: tail.iter().map(|e| e.n_scales).sum(),
    })
}
