use std::sync::Arc;

use mbmlab_core::experiments::fbm_covariance_ensemble;
use mbmlab_core::lattice::derive_seed;
use mbmlab_core::oracle::{
    covariance, det_identity_check, fbm_constant, fbm_covariance_closed, lnd_check, oracle_tolerance, variance_floor,
    CheckRecord, CovMatrix, Interval, WienerKernel, ORACLE_ABS_TOL,
};
use mbmlab_core::wavelet::KernelBank;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, VerifyConfig};
use crate::kernels::{kernel_checks, load_or_build};
use crate::output::Artifacts;
use crate::Outcome;

pub const REPORT_FORMAT: &str = "mbmlab-verify/1";

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub format: &'static str,
    pub seed: u64,
    pub pass: bool,
    pub total: usize,
    pub failed: usize,
    pub checks: Vec<CheckRecord>,
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let v = &cfg.verify;
    cfg.synthesis.validate()?;
    v.validate((0.1, 0.9))?;
    let interval = Interval::new(v.interval.0, v.interval.1)?;
    let mut out = Artifacts::new(&cfg.out)?;

    let mut bank = load_or_build(&cfg.tables_dir(), cfg.synthesis)?;
    if v.kernel_scale != 1.0 {
        let b = KernelBank {
            config: bank.config,
            synthesis: bank.synthesis.iter().map(|t| t.scaled(v.kernel_scale)).collect(),
            dual: bank.dual.clone(),
        };
        bank = Arc::new(b);
    }

    let mut checks = Vec::new();
    if v.kernel_checks {
        checks.extend(kernel_checks(&bank)?.checks);
    }
    checks.extend(floor_checks(v));
    let tuples = random_tuples(v, cfg.seed);
    checks.extend(tuples.par_iter().map(|p| guard("one_sided_lnd", json!({ "points": p }), || lnd_check(&v.profile, p, interval))).collect::<Vec<_>>());
    checks.extend(tuples.iter().take(v.psd_tuples).map(|p| psd_check(v, p)));
    checks.extend(det_checks(v, interval, cfg.seed));
    checks.extend(quadrature_checks(v));
    checks.extend(closed_form_checks());
    if v.covariance_seeds >= 2 {
        let thetas = &v.covariance_thetas;
        match fbm_covariance_ensemble(&bank, thetas, &v.covariance_pairs, v.covariance_seeds, derive_seed(cfg.seed, "verify")) {
            Ok(est) => checks.extend(est.iter().map(|e| e.record())),
            Err(e) => checks.push(failed("fbm_covariance", json!({ "seeds": v.covariance_seeds }), &e)),
        }
    }

    let failed = checks.iter().filter(|c| !c.pass).count();
    let report = VerifyReport { format: REPORT_FORMAT, seed: cfg.seed, pass: failed == 0, total: checks.len(), failed, checks };
    out.write_json("verify_report.json", &report)?;
    out.finish("verify", cfg, json!({ "pass": report.pass }))?;

    let mut kinds: Vec<&str> = report.checks.iter().map(|c| c.check.as_str()).collect();
    kinds.dedup();
    for kind in kinds {
        let of_kind: Vec<&CheckRecord> = report.checks.iter().filter(|c| c.check == kind).collect();
        let bad = of_kind.iter().filter(|c| !c.pass).count();
        println!("{kind:<20} {:>4} checks  {bad} failed", of_kind.len());
    }
    Ok(if report.pass { Outcome::Pass } else { Outcome::Fail(format!("{failed} of {} checks failed", report.total)) })
}

fn failed(check: &str, mut params: Value, err: &dyn std::fmt::Display) -> CheckRecord {
    if let Some(m) = params.as_object_mut() {
        m.insert("error".into(), json!(err.to_string()));
    }
    CheckRecord { check: check.into(), parameters: params, lhs: f64::NAN, rhs: f64::NAN, slack: f64::NAN, tolerance: 0.0, pass: false }
}

/// Runs one check, turning a numerical error into a failed record.
fn guard(check: &str, params: Value, f: impl FnOnce() -> mbmlab_core::Result<CheckRecord>) -> CheckRecord {
    f().unwrap_or_else(|e| failed(check, params, &e))
}

fn floor_checks(v: &VerifyConfig) -> Vec<CheckRecord> {
    let n = v.floor_points;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let s = if n > 1 { 1.0 + i as f64 / (n - 1) as f64 } else { 1.0 };
            guard("variance_floor", json!({ "s": s }), || {
                let f = variance_floor(&v.profile, s, 1.0)?;
                Ok(CheckRecord::at_least("variance_floor", json!({ "s": s, "delta1": 1.0 }), f.variance, f.floor, f.error))
            })
        })
        .collect()
}

/// Strictly increasing tuples of 2..=max points drawn uniformly from the interval.
fn random_tuples(v: &VerifyConfig, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "verify/lnd"));
    let (lo, hi) = v.interval;
    (0..v.lnd_tuples)
        .map(|_| {
            let n = rng.gen_range(2..=v.lnd_max_points);
            loop {
                let mut p: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
                p.sort_by(|a, b| a.total_cmp(b));
                if p.windows(2).all(|w| w[1] - w[0] > 1e-6) {
                    return p;
                }
            }
        })
        .collect()
}

fn psd_check(v: &VerifyConfig, points: &[f64]) -> CheckRecord {
    guard("covariance_psd", json!({ "points": points }), || {
        let m = CovMatrix::assemble(&v.profile, points)?;
        Ok(CheckRecord::at_least("covariance_psd", json!({ "points": points }), m.min_eigenvalue(), 0.0, 1e-10 * m.trace()))
    })
}

fn det_checks(v: &VerifyConfig, interval: Interval, seed: u64) -> Vec<CheckRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "verify/det"));
    let pairs: Vec<(f64, f64)> = (0..v.det_pairs)
        .map(|_| {
            let a = rng.gen_range(interval.lo..=interval.hi);
            let b = rng.gen_range(interval.lo..=interval.hi);
            (a.min(b), a.max(b))
        })
        .filter(|(a, b)| b - a > 1e-6)
        .collect();
    pairs
        .par_iter()
        .map(|&(s, t)| guard("det_identity", json!({ "s": s, "t": t }), || det_identity_check(&v.profile, s, t, interval)))
        .collect()
}

/// Halving the tolerance must move each covariance by less than the two error bounds.
fn quadrature_checks(v: &VerifyConfig) -> Vec<CheckRecord> {
    let (lo, hi) = v.interval;
    let mid = 0.5 * (lo + hi);
    let pairs = [(lo, lo), (lo, mid), (mid, hi), (hi, hi)];
    pairs
        .par_iter()
        .map(|&(s, t)| {
            guard("quadrature_convergence", json!({ "s": s, "t": t }), || {
                let (k1, k2) = (WienerKernel::y_at(&v.profile, s), WienerKernel::y_at(&v.profile, t));
                let a = covariance(&k1, &k2, oracle_tolerance())?;
                let b = covariance(&k1, &k2, oracle_tolerance().halved())?;
                Ok(CheckRecord::close("quadrature_convergence", json!({ "s": s, "t": t }), a.value, b.value, a.error + b.error + 1e-12))
            })
        })
        .collect()
}

/// Direct quadrature of the fBm kernels against the closed form built on the cached constant.
fn closed_form_checks() -> Vec<CheckRecord> {
    let cases = [(1.0, 2.0, 0.3), (0.5, 1.5, 0.5), (0.25, 0.75, 0.7), (1.5, 0.5, 0.85)];
    cases
        .par_iter()
        .map(|&(t, s, theta)| {
            let params = json!({ "t": t, "s": s, "theta": theta });
            guard("fbm_closed_form", params.clone(), || {
                let q = covariance(&WienerKernel::B { t, theta }, &WienerKernel::B { t: s, theta }, oracle_tolerance())?;
                let closed = fbm_covariance_closed(t, s, theta, fbm_constant(theta)?);
                Ok(CheckRecord::close("fbm_closed_form", params, q.value, closed, q.error + ORACLE_ABS_TOL))
            })
        })
        .collect()
}
