//! Sampled trajectories on uniform grids.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hoelder::HProfile;
use crate::scalar::Real;

/// Which process a trajectory samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "snake_case")]
pub enum ProcessKind {
    /// The mBm `X(t) = B(t, H(t))`.
    Mbm,
    /// `Y(s) = d/dtheta B(s, H(s))`.
    Y,
    /// `d^n/dtheta^n B(t, theta)` at fixed `theta`; `n = 0` is fBm.
    Field { theta: f64, n: usize },
    /// Data not produced by the field engine.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub kind: ProcessKind,
    pub seed: Option<u64>,
    pub h_profile: Option<HProfile>,
    /// Bound on the series truncation error of each value.
    pub truncation_bound: Option<f64>,
    pub config: Option<serde_json::Value>,
}

impl TrajectoryMeta {
    pub fn external() -> Self {
        TrajectoryMeta { kind: ProcessKind::External, seed: None, h_profile: None, truncation_bound: None, config: None }
    }
}

/// Values on the grid `t_i = t0 + i step`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGrid<R> {
    pub t0: R,
    pub step: R,
    pub values: Vec<R>,
    pub meta: TrajectoryMeta,
}

impl<R: Real> TrajectoryGrid<R> {
    pub fn new(t0: R, step: R, values: Vec<R>, meta: TrajectoryMeta) -> Result<Self> {
        if !(step > R::zero()) || !t0.is_finite() {
            return Err(Error::OutOfRange(format!("grid start {t0:?} / step {step:?} invalid")));
        }
        if values.len() < 2 {
            return Err(Error::Insufficient("a trajectory needs at least two samples".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::OutOfRange(format!("non-finite value at index {i}")));
        }
        Ok(TrajectoryGrid { t0, step, values, meta })
    }

    /// Samples `f` on `n` points from `t0` with spacing `step`.
    pub fn from_fn(t0: R, step: R, n: usize, f: impl Fn(R) -> R) -> Result<Self> {
        let values = (0..n).map(|i| f(t0 + step * R::c(i as f64))).collect();
        Self::new(t0, step, values, TrajectoryMeta::external())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t(&self, i: usize) -> R {
        self.t0 + self.step * R::c(i as f64)
    }

    pub fn t_end(&self) -> R {
        self.t(self.len() - 1)
    }

    /// Nearest grid index to `s`, if `s` lies within the grid.
    pub fn nearest(&self, s: R) -> Option<usize> {
        let x = ((s - self.t0) / self.step).round();
        if x < R::zero() || x > R::c((self.len() - 1) as f64) {
            None
        } else {
            Some(x.f64() as usize)
        }
    }

    /// Indices of grid points inside `[a, b]`.
    pub fn index_range(&self, a: R, b: R) -> Option<(usize, usize)> {
        let tol = self.step * R::c(1e-9);
        let lo = ((a - self.t0 - tol) / self.step).ceil().max(R::zero());
        let hi = ((b - self.t0 + tol) / self.step).floor().min(R::c((self.len() - 1) as f64));
        if hi < lo {
            None
        } else {
            Some((lo.f64() as usize, hi.f64() as usize))
        }
    }

    /// CSV with header `t,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{:.12},{:.17e}", self.t(i).f64(), v.f64())?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON sidecar describing the grid and its provenance.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "t0": self.t0.f64(),
            "step": self.step.f64(),
            "points": self.len(),
            "meta": self.meta,
        })
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn nearest_inverts_the_grid(t0 in -5.0f64..5.0, step_log2 in 2i32..16, n in 2usize..5000, pick in 0.0f64..1.0) {
            let step = 2f64.powi(-step_log2);
            let g = TrajectoryGrid::from_fn(t0, step, n, |t| t).unwrap();
            let i = ((n - 1) as f64 * pick) as usize;
            prop_assert_eq!(g.nearest(g.t(i)), Some(i));
            let (a, b) = g.index_range(g.t(0), g.t_end()).unwrap();
            prop_assert_eq!((a, b), (0, n - 1));
        }
    }
}
