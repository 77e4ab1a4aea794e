use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::replicate_seed;
use crate::error::{Error, Result};
use crate::field::{FieldConfig, FieldEngine};
use crate::oracle::{fbm_constant, fbm_covariance_closed, CheckRecord};
use crate::wavelet::KernelBank;

/// Point pairs `(t, s)` used for covariance checks.
pub const DEFAULT_PAIRS: [(f64, f64); 10] = [
    (0.25, 0.5),
    (0.5, 0.5),
    (0.5, 1.0),
    (0.75, 1.5),
    (1.0, 1.0),
    (1.0, 2.0),
    (1.25, 0.25),
    (1.5, 1.75),
    (2.0, 2.0),
    (0.125, 1.875),
];

/// Monte-Carlo covariance of `B(t, theta)` and `B(s, theta)` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub theta: f64,
    pub t: f64,
    pub s: f64,
    pub estimate: f64,
    pub standard_error: f64,
    /// `C(theta) / 2 (|t|^2theta + |s|^2theta - |t - s|^2theta)` with `C` from quadrature.
    pub oracle: f64,
}

impl CovarianceEstimate {
    pub fn z_score(&self) -> f64 {
        (self.estimate - self.oracle) / self.standard_error
    }

    pub fn record(&self) -> CheckRecord {
        CheckRecord::close(
            "fbm_covariance",
            serde_json::json!({ "theta": self.theta, "t": self.t, "s": self.s, "standard_error": self.standard_error }),
            self.estimate,
            self.oracle,
            3.0 * self.standard_error,
        )
    }
}

/// Ensemble covariances over `seeds` replicates of the series, one engine per replicate.
pub fn fbm_covariance_ensemble(
    bank: &Arc<KernelBank>,
    thetas: &[f64],
    pairs: &[(f64, f64)],
    seeds: u32,
    top_seed: u64,
) -> Result<Vec<CovarianceEstimate>> {
    if seeds < 2 || thetas.is_empty() || pairs.is_empty() {
        return Err(Error::Insufficient("covariance ensemble needs two seeds, a theta and a pair".into()));
    }
    let t_bound = pairs.iter().fold(1.0f64, |m, &(t, s)| m.max(t.abs()).max(s.abs()));
    let mut times: Vec<f64> = pairs.iter().flat_map(|&(t, s)| [t, s]).collect();
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    let pos = |x: f64| times.iter().position(|&v| v == x).unwrap();
    // products[seed][theta][pair]
    let products = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let cfg = FieldConfig { t_bound, seed: replicate_seed(top_seed, "covariance", i), ..FieldConfig::default() };
            let e = FieldEngine::new(bank.clone(), cfg)?;
            thetas
                .iter()
                .map(|&th| {
                    let v = times.iter().map(|&t| e.eval_field(t, th, 0)).collect::<Result<Vec<_>>>()?;
                    Ok(pairs.iter().map(|&(t, s)| v[pos(t)] * v[pos(s)]).collect::<Vec<f64>>())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = seeds as f64;
    let mut out = Vec::new();
    for (a, &theta) in thetas.iter().enumerate() {
        let c = fbm_constant(theta)?;
        for (b, &(t, s)) in pairs.iter().enumerate() {
            let xs: Vec<f64> = products.iter().map(|p| p[a][b]).collect();
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            out.push(CovarianceEstimate {
                theta,
                t,
                s,
                estimate: mean,
                standard_error: (var / n).sqrt(),
                oracle: fbm_covariance_closed(t, s, theta, c),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_ensemble() {
        let bank = crate::field::test_bank();
        let r = fbm_covariance_ensemble(&bank, &[0.5], &[(1.0, 1.0), (0.5, 1.0)], 40, 3).unwrap();
        assert_eq!(r.len(), 2);
        for e in &r {
            assert!(e.standard_error > 0.0 && e.z_score().abs() < 5.0, "{e:?}");
        }
        assert!((r[1].oracle - 0.5).abs() < 1e-8);
        assert!(fbm_covariance_ensemble(&bank, &[0.5], &[], 40, 3).is_err());
    }
}
