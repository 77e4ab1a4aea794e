//! Ground-truth covariances from direct quadrature of the Wiener-integral kernels, Gaussian
//! conditioning, and the variance and local-nondeterminism bounds for `Y`.

mod conditioning;
mod kernel;

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

pub use conditioning::{cholesky_solve, conditional_variance, ConditionalVariance, CovMatrix};
pub use kernel::{covariance, fbm_covariance_closed, log_square_moment, WienerKernel};

use crate::error::{Error, Result};
use crate::hoelder::HProfile;
use crate::quadrature::Tolerance;

/// Absolute tolerance of the oracle covariances.
pub const ORACLE_ABS_TOL: f64 = 1e-8;

pub fn oracle_tolerance() -> Tolerance<f64> {
    Tolerance::new(ORACLE_ABS_TOL * 0.01, 1e-10)
}

/// Interval `[delta1, delta2]` with `0 < delta1 < delta2` and length below 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi - lo < 1.0) {
            return Err(Error::OutOfRange(format!("interval [{lo}, {hi}] needs 0 < lo < hi < lo + 1")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.lo && s <= self.hi
    }
}

fn c_cache() -> &'static RwLock<HashMap<u64, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// `C(theta) = Var B(1, theta)`, memoised per `theta`.
pub fn fbm_constant(theta: f64) -> Result<f64> {
    if let Some(&c) = c_cache().read().unwrap().get(&theta.to_bits()) {
        return Ok(c);
    }
    let k = WienerKernel::B { t: 1.0, theta };
    let c = covariance(&k, &k, oracle_tolerance())?.value;
    c_cache().write().unwrap().insert(theta.to_bits(), c);
    Ok(c)
}

/// `Var B(t, theta)` through the cached constant.
pub fn fbm_variance(t: f64, theta: f64) -> Result<f64> {
    Ok(fbm_constant(theta)? * t.abs().powf(2.0 * theta))
}

/// `Var Y(s)` together with its error bound.
pub fn y_variance(profile: &HProfile, s: f64) -> Result<(f64, f64)> {
    let k = WienerKernel::y_at(profile, s);
    let q = covariance(&k, &k, oracle_tolerance())?;
    Ok((q.value, q.error))
}

pub fn y_covariance(profile: &HProfile, s: f64, t: f64) -> Result<(f64, f64)> {
    let q = covariance(&WienerKernel::y_at(profile, s), &WienerKernel::y_at(profile, t), oracle_tolerance())?;
    Ok((q.value, q.error))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceFloor {
    pub variance: f64,
    pub error: f64,
    /// `int_0^min(delta1, 1) v log^2 v dv`.
    pub floor: f64,
}

impl VarianceFloor {
    pub fn holds(&self) -> bool {
        self.variance + self.error >= self.floor
    }
}

/// Quadrature `Var Y(s)` and the analytic lower bound for `s >= delta1`.
pub fn variance_floor(profile: &HProfile, s: f64, delta1: f64) -> Result<VarianceFloor> {
    if !(delta1 > 0.0 && s >= delta1) {
        return Err(Error::OutOfRange(format!("need s >= delta1 > 0, got s = {s}, delta1 = {delta1}")));
    }
    let (variance, error) = y_variance(profile, s)?;
    Ok(VarianceFloor { variance, error, floor: log_square_moment(delta1.min(1.0)) })
}

/// `2^-1 d^(2h) log^2 d`, the conditional-variance bound for a gap `d < 1`.
pub fn lnd_bound(gap: f64, h: f64) -> f64 {
    0.5 * gap.powf(2.0 * h) * gap.ln().powi(2)
}

/// One verification outcome in the JSON report format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub parameters: serde_json::Value,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// Record for `lhs >= rhs - tolerance`.
    pub fn at_least(check: &str, parameters: serde_json::Value, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = lhs - rhs;
        CheckRecord { check: check.into(), parameters, lhs, rhs, slack, tolerance, pass: slack >= -tolerance }
    }

    /// Record for `|lhs - rhs| <= tolerance`.
    pub fn close(check: &str, parameters: serde_json::Value, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = tolerance - (lhs - rhs).abs();
        CheckRecord { check: check.into(), parameters, lhs, rhs, slack, tolerance, pass: slack >= 0.0 }
    }
}

/// Conditional-variance bound at the last point of an increasing tuple.
pub fn lnd_check(profile: &HProfile, points: &[f64], interval: Interval) -> Result<CheckRecord> {
    let cv = conditional_variance(profile, points, interval)?;
    let params = serde_json::json!({ "points": points, "profile": profile, "ridge": cv.ridge });
    let mut r = CheckRecord::at_least("one_sided_lnd", params, cv.value, cv.bound, cv.error);
    r.pass = r.pass && cv.value.is_finite();
    Ok(r)
}

/// `det Gamma_Y(s, t) = Var Y(s) Var(Y(t) | Y(s))`.
pub fn det_identity_check(profile: &HProfile, s: f64, t: f64, interval: Interval) -> Result<CheckRecord> {
    let m = CovMatrix::assemble(profile, &[s, t])?;
    let det = m.entries[0][0] * m.entries[1][1] - m.entries[0][1] * m.entries[1][0];
    let cv = conditional_variance(profile, &[s, t], interval)?;
    let rhs = m.entries[0][0] * cv.value;
    let tol = 1e-8 * det.abs().max(rhs.abs());
    Ok(CheckRecord::close("det_identity", serde_json::json!({ "s": s, "t": t, "profile": profile }), det, rhs, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hoelder::HProfile;

    #[test]
    fn constant_is_cached() {
        let a = fbm_constant(0.5).unwrap();
        assert!((a - 1.0).abs() < 1e-9);
        assert_eq!(fbm_constant(0.5).unwrap().to_bits(), a.to_bits());
        assert!((fbm_variance(2.0, 0.5).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn variance_floors() {
        let h = HProfile::Constant { value: 0.35 };
        let v = variance_floor(&h, 1.3, 1.0).unwrap();
        assert_eq!(v.floor, 0.25);
        assert!(v.holds() && v.variance.is_finite());
        let e = (-1.0f64).exp();
        let v = variance_floor(&h, 1.3, e).unwrap();
        assert!((v.floor - e * e * 2.5 / 2.0).abs() < 1e-15);
        assert!(variance_floor(&h, 0.2, 0.5).is_err());
        assert!(variance_floor(&h, 0.2, 0.0).is_err());
    }

    #[test]
    fn lnd_two_points() {
        let h = HProfile::Constant { value: 0.5 };
        let i = Interval::new(0.5, 1.0).unwrap();
        let r = lnd_check(&h, &[0.5, 0.6], i).unwrap();
        assert!((r.rhs - 0.26510).abs() < 1e-5);
        assert!(r.pass, "{r:?}");
        let one = lnd_check(&h, &[0.7], i).unwrap();
        assert!(one.lhs >= log_square_moment(0.5));
    }

    #[test]
    fn det_identity() {
        let h = HProfile::remark_preset();
        let i = Interval::new(1.0, 1.9).unwrap();
        assert!(det_identity_check(&h, 1.2, 1.45, i).unwrap().pass);
    }

    #[test]
    fn refuses_points_outside_interval() {
        let h = HProfile::Constant { value: 0.5 };
        let i = Interval::new(0.5, 1.0).unwrap();
        assert!(conditional_variance(&h, &[0.4, 0.6], i).is_err());
        assert!(conditional_variance(&h, &[0.6, 0.6], i).is_err());
        assert!(Interval::new(0.5, 1.6).is_err());
    }

    #[test]
    fn record_serialises() {
        let r = CheckRecord::at_least("x", serde_json::json!({}), 2.0, 1.0, 0.0);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["check", "parameters", "lhs", "rhs", "slack", "tolerance", "pass"] {
            assert!(v.get(key).is_some());
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn y_covariance_is_symmetric_and_bounded(s in 1.0f64..2.0, t in 1.0f64..2.0) {
            let h = HProfile::remark_preset();
            let (st, e1) = y_covariance(&h, s, t).unwrap();
            let (ts, e2) = y_covariance(&h, t, s).unwrap();
            prop_assert!((st - ts).abs() <= e1 + e2 + 1e-12);
            let (vs, _) = y_variance(&h, s).unwrap();
            let (vt, _) = y_variance(&h, t).unwrap();
            prop_assert!(st.abs() <= (vs * vt).sqrt() * (1.0 + 1e-9));
        }

        #[test]
        fn fbm_closed_form_is_symmetric_and_self_consistent(t in -3.0f64..3.0, s in -3.0f64..3.0, theta in 0.1f64..0.9) {
            let c = 1.3;
            let a = fbm_covariance_closed(t, s, theta, c);
            prop_assert!((a - fbm_covariance_closed(s, t, theta, c)).abs() < 1e-12);
            prop_assert!((fbm_covariance_closed(t, t, theta, c) - c * t.abs().powf(2.0 * theta)).abs() < 1e-12);
        }
    }
}
