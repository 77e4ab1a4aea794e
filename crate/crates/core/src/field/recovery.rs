use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::TrajectoryGrid;
use crate::wavelet::{KernelKind, KernelTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoveryOptions {
    /// Half-width of the integration range in units of `2^-j`.
    pub radius: f64,
    /// The grid must have at least `2^(j + extra_levels)` points per unit.
    pub extra_levels: u32,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions { radius: 16.0, extra_levels: 6 }
    }
}

/// `2^(j (1 + theta)) int B2(s, theta) dual(2^j s - k, theta) ds` by the trapezoid rule over
/// `|2^j s - k| <= radius`, from `B2(., theta)` sampled on a grid.
pub fn recover_coefficient(
    b2: &TrajectoryGrid<f64>,
    dual: &KernelTable,
    j: i32,
    k: i64,
    theta: f64,
    opts: &RecoveryOptions,
) -> Result<f64> {
    if dual.which != KernelKind::Dual || dual.dtheta_order != 0 || dual.dy_order != 0 {
        return Err(Error::Format("recovery needs the underived dual kernel".into()));
    }
    dual.check_theta(theta)?;
    if !(1..=30).contains(&j) {
        return Err(Error::OutOfRange(format!("level {j} outside 1..=30")));
    }
    let sc = 2f64.powi(j);
    let need = 1.0 / (sc * 2f64.powi(opts.extra_levels as i32));
    if b2.step > need * (1.0 + 1e-9) {
        return Err(Error::GridTooCoarse(format!("grid step {} exceeds {need}", b2.step)));
    }
    let (a, b) = ((k as f64 - opts.radius) / sc, (k as f64 + opts.radius) / sc);
    let tol = 1e-9 * b2.step;
    if b2.t0 > a + tol || b2.t_end() < b - tol {
        return Err(Error::OutOfRange(format!(
            "grid [{}, {}] does not cover the support [{a}, {b}]",
            b2.t0,
            b2.t_end()
        )));
    }
    let (i0, i1) = b2.index_range(a, b).ok_or_else(|| Error::OutOfRange("support outside the grid".into()))?;
    let mut acc = 0.0;
    for i in i0..=i1 {
        let w = if i == i0 || i == i1 { 0.5 } else { 1.0 };
        acc += w * b2.values[i] * dual.eval_unchecked(sc * b2.t(i) - k as f64, theta);
    }
    Ok(acc * b2.step * 2f64.powf(j as f64 * (1.0 + theta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{test_bank, Component, FieldConfig, FieldEngine};
    use crate::lattice::{CoefficientField, DyadicIndex};

    fn b2_grid(e: &FieldEngine, theta: f64, j: i32) -> TrajectoryGrid<f64> {
        let step = 2f64.powi(-(j + 6));
        let len = (20.0 / step) as usize + 1;
        e.component_trajectory(Component::B2, theta, 0, -10.0, step, len).unwrap()
    }

    #[test]
    fn recovers_coefficient() {
        let cfg = FieldConfig { t_bound: 10.0, j_max: 10, seed: 21, ..FieldConfig::default() };
        let e = FieldEngine::new(test_bank(), cfg).unwrap();
        let g = b2_grid(&e, 0.5, 1);
        let opts = RecoveryOptions::default();
        for k in [0, 3] {
            let r = recover_coefficient(&g, &test_bank().dual, 1, k, 0.5, &opts).unwrap();
            let eps = e.lattice().coefficient(DyadicIndex::new(1, k)).unwrap();
            assert!((r - eps).abs() < 5e-2, "k {k}: {r} vs {eps}");
        }
    }

    #[test]
    fn zero_field_recovers_zero() {
        let cfg = FieldConfig { t_bound: 10.0, j_max: 8, ..FieldConfig::default() };
        let e = FieldEngine::with_coefficients(test_bank(), cfg, CoefficientField::zeros()).unwrap();
        let g = b2_grid(&e, 0.3, 1);
        assert_eq!(recover_coefficient(&g, &test_bank().dual, 1, 0, 0.3, &RecoveryOptions::default()).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let bank = test_bank();
        let g = TrajectoryGrid::from_fn(-1.0, 1.0 / 64.0, 129, |_| 0.0).unwrap();
        let opts = RecoveryOptions::default();
        assert!(matches!(recover_coefficient(&g, &bank.dual, 1, 0, 0.5, &opts), Err(Error::GridTooCoarse(_))));
        let fine = TrajectoryGrid::from_fn(-1.0, 1.0 / 128.0, 257, |_| 0.0).unwrap();
        assert!(matches!(recover_coefficient(&fine, &bank.dual, 1, 0, 0.5, &opts), Err(Error::OutOfRange(_))));
        assert!(recover_coefficient(&fine, &bank.synthesis[0], 1, 0, 0.5, &opts).is_err());
        assert!(recover_coefficient(&fine, &bank.dual, 0, 0, 0.5, &opts).is_err());
    }
}
