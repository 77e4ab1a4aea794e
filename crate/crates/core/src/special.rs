//! Gamma-family functions needed by the kernel spectra.

pub use statrs::function::gamma::{digamma, gamma, ln_gamma};

const BERNOULLI_2M: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Polygamma function `psi^(k)(x)` for `x > 0`; `k = 0` is the digamma function.
pub fn polygamma(k: u32, x: f64) -> f64 {
    assert!(x > 0.0, "polygamma requires a positive argument, got {x}");
    if k == 0 {
        return digamma(x);
    }
    let sign = if k % 2 == 0 { -1.0 } else { 1.0 }; // (-1)^(k+1)
    let kf = factorial(k);
    // shift upward until the asymptotic series is accurate
    let mut shift = 0.0;
    let mut z = x;
    while z < 20.0 {
        shift += kf / z.powi(k as i32 + 1);
        z += 1.0;
    }
    let mut series = factorial(k - 1) / z.powi(k as i32) + kf / (2.0 * z.powi(k as i32 + 1));
    for (m, b) in BERNOULLI_2M.iter().enumerate() {
        let two_m = 2 * (m as u32 + 1);
        series += b * factorial(two_m + k - 1) / (factorial(two_m) * z.powi((two_m + k) as i32));
    }
    sign * (series + shift)
}

/// `sum_{n >= 0} (n + x)^-2`.
pub fn trigamma(x: f64) -> f64 {
    polygamma(1, x)
}

/// Binomial coefficient as a float.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const ZETA3: f64 = 1.202_056_903_159_594_3;

    #[test]
    fn polygamma_at_one() {
        assert!((polygamma(1, 1.0) - PI * PI / 6.0).abs() < 1e-13);
        assert!((polygamma(2, 1.0) + 2.0 * ZETA3).abs() < 1e-13);
        assert!((polygamma(3, 1.0) - PI.powi(4) / 15.0).abs() < 1e-12);
    }

    #[test]
    fn polygamma_at_half() {
        assert!((polygamma(1, 0.5) - PI * PI / 2.0).abs() < 1e-12);
        assert!((polygamma(2, 0.5) + 14.0 * ZETA3).abs() < 1e-11);
    }

    #[test]
    fn polygamma_recurrence() {
        for &x in &[0.3, 0.77, 1.9, 4.2, 31.0] {
            for k in 1..4u32 {
                let lhs = polygamma(k, x + 1.0) - polygamma(k, x);
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let rhs = sign * factorial(k) / x.powi(k as i32 + 1);
                assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn trigamma_matches_direct_sum() {
        let direct: f64 = (0..2_000_000).map(|n| 1.0 / ((n as f64 + 7.0).powi(2))).sum();
        let tail = 1.0 / (2_000_007.0 - 0.5);
        assert!((trigamma(7.0) - direct - tail).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(2, 0), 1.0);
        assert_eq!(binomial(2, 3), 0.0);
    }
}
