use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::trajectory::TrajectoryGrid;

/// Zero crossings of a sampled function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSet<R> {
    pub step: R,
    pub points: Vec<R>,
    /// Nodes with `|Y| <= threshold` count as zeros.
    pub threshold: R,
    pub refine_tol: R,
}

impl<R: Real> LevelSet<R> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Bisection on a bracketing pair until the bracket is narrower than `tol`.
pub fn bisect<R: Real>(f: &dyn Fn(R) -> R, mut a: R, mut b: R, mut fa: R, tol: R) -> R {
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = (a + b) * R::c(0.5);
        let fm = f(m);
        if fm == R::zero() {
            return m;
        }
        if (fm > R::zero()) == (fa > R::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    (a + b) * R::c(0.5)
}

/// Zero level set of a trajectory. Sign changes between consecutive nodes are refined by
/// bisection on `refine` (or by linear interpolation when no evaluator is given) to width
/// `refine_tol`; nodes with `|Y| <= threshold` are added as they are. The default threshold
/// is `1e-12 max |Y|`.
pub fn zero_level_set<R: Real>(
    traj: &TrajectoryGrid<R>,
    refine_tol: R,
    refine: Option<&dyn Fn(R) -> R>,
    threshold: Option<R>,
) -> Result<LevelSet<R>> {
    if !(refine_tol > R::zero()) {
        return Err(Error::OutOfRange("refine_tol must be positive".into()));
    }
    let y = &traj.values;
    let scale = y.iter().fold(R::zero(), |a, v| a.max(v.abs()));
    let threshold = threshold.unwrap_or(scale * R::c(1e-12));
    let mut points = Vec::new();
    for i in 0..y.len() {
        if y[i].abs() <= threshold {
            points.push(traj.t(i));
            continue;
        }
        if i + 1 < y.len() && y[i + 1].abs() > threshold && (y[i] > R::zero()) != (y[i + 1] > R::zero()) {
            let (a, b) = (traj.t(i), traj.t(i + 1));
            let z = match refine {
                Some(f) => bisect(f, a, b, y[i], refine_tol),
                None => a + (b - a) * y[i] / (y[i] - y[i + 1]),
            };
            points.push(z);
        }
    }
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup_by(|a, b| (*a - *b).abs() <= refine_tol);
    Ok(LevelSet { step: traj.step, points, threshold, refine_tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_zeros() {
        let n = 10_001;
        let tr = TrajectoryGrid::from_fn(0.0, 1.0 / (n - 1) as f64, n, |s| (2.0 * std::f64::consts::PI * s).sin()).unwrap();
        let f = |s: f64| (2.0 * std::f64::consts::PI * s).sin();
        let ls = zero_level_set(&tr, 1e-10, Some(&f), None).unwrap();
        assert_eq!(ls.len(), 3, "{:?}", ls.points);
        for (p, e) in ls.points.iter().zip([0.0, 0.5, 1.0]) {
            assert!((p - e).abs() <= 1e-10);
        }
    }

    #[test]
    fn shifted_input_has_no_zeros() {
        let tr = TrajectoryGrid::from_fn(0.0, 1e-3, 1001, |s: f64| (40.0 * s).sin()).unwrap();
        let big = tr.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let shifted = TrajectoryGrid::from_fn(0.0, 1e-3, 1001, |s: f64| (40.0 * s).sin() + 10.0 * big).unwrap();
        assert!(zero_level_set(&shifted, 1e-9, None, None).unwrap().is_empty());
        assert!(!zero_level_set(&tr, 1e-9, None, None).unwrap().is_empty());
    }

    #[test]
    fn single_precision() {
        let tr = TrajectoryGrid::from_fn(0.0f32, 0.01, 101, |s| s - 0.333).unwrap();
        let ls = zero_level_set(&tr, 1e-6, None, None).unwrap();
        assert_eq!(ls.len(), 1);
        assert!((ls.points[0] - 0.333).abs() < 1e-5);
    }
}
