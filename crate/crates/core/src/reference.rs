//! Exact samplers used as independent references for the estimators.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Autocovariance of unit-step fractional Gaussian noise.
pub fn fgn_autocovariance(theta: f64, k: usize) -> f64 {
    let k = k as f64;
    let h2 = 2.0 * theta;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Fractional Brownian motion `B_theta(i * step)`, `i = 0..=n`, with `Var B(t) = |t|^{2 theta}`,
/// by circulant embedding of the increment covariance.
pub fn fbm_circulant(theta: f64, n: usize, step: f64, seed: u64) -> Result<Vec<f64>> {
    if !(theta > 0.0 && theta < 1.0) || n == 0 {
        return Err(Error::OutOfRange(format!("theta = {theta}, n = {n}")));
    }
    let m = 2 * n.next_power_of_two();
    let mut c: Vec<Complex64> = (0..m)
        .map(|i| Complex64::new(fgn_autocovariance(theta, i.min(m - i)), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut c);
    if c.iter().any(|v| v.re < -1e-8) {
        return Err(Error::Singular("circulant embedding is not nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<Complex64> = c
        .iter()
        .map(|v| {
            let s = (v.re.max(0.0) / m as f64).sqrt();
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(a, b) * s
        })
        .collect();
    planner.plan_fft_forward(m).process(&mut w);
    let scale = step.powf(theta);
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for v in &w[..n] {
        acc += v.re * scale;
        out.push(acc);
    }
    Ok(out)
}
