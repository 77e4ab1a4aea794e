use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::TrajectoryGrid;

/// Above this many cells the pair sum goes through an FFT convolution.
const DIRECT_PAIR_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub n: u32,
    pub gamma: f64,
    pub interval: (f64, f64),
    /// `int_I Phi_n`.
    pub mass: f64,
    /// `int int |s - t|^-gamma Phi_n(s) Phi_n(t) ds dt`.
    pub energy: f64,
    /// `2 pi n int int_{I x I} |s - t|^-gamma`, which `energy` never exceeds.
    pub energy_bound: f64,
}

/// `Phi_n(y) = sqrt(2 pi n) exp(-n y^2 / 2)`.
pub fn phi_n(n: u32, y: f64) -> f64 {
    let n = n as f64;
    (2.0 * std::f64::consts::PI * n).sqrt() * (-0.5 * n * y * y).exp()
}

fn riesz_antiderivative(u: f64, gamma: f64) -> f64 {
    u.abs().powf(2.0 - gamma) / ((1.0 - gamma) * (2.0 - gamma))
}

/// `int_0^1 int_0^1 |x - y + d|^-gamma dx dy`.
fn cell_pair_weight(d: usize, gamma: f64) -> f64 {
    let d = d as f64;
    riesz_antiderivative(d + 1.0, gamma) - 2.0 * riesz_antiderivative(d, gamma) + riesz_antiderivative(d - 1.0, gamma)
}

/// `sum_{a,b} c_a c_b w(|a - b|)`.
fn pair_sum(c: &[f64], w: &[f64]) -> f64 {
    let n = c.len();
    if n <= DIRECT_PAIR_LIMIT {
        let mut total = 0.0;
        for a in 0..n {
            let mut row = w[0] * c[a];
            for b in a + 1..n {
                row += 2.0 * w[b - a] * c[b];
            }
            total += c[a] * row;
        }
        return total;
    }
    // (w * c)[a] over the symmetric kernel, by circular convolution of length >= 2n
    let m = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mut cc: Vec<Complex64> = (0..m).map(|i| Complex64::new(if i < n { c[i] } else { 0.0 }, 0.0)).collect();
    let mut ww: Vec<Complex64> = (0..m)
        .map(|i| {
            let d = if i < n { i } else if i > m - n { m - i } else { return Complex64::new(0.0, 0.0) };
            Complex64::new(w[d], 0.0)
        })
        .collect();
    fwd.process(&mut cc);
    fwd.process(&mut ww);
    for (a, b) in cc.iter_mut().zip(&ww) {
        *a *= b;
    }
    inv.process(&mut cc);
    (0..n).map(|a| c[a] * cc[a].re / m as f64).sum()
}

/// Mass and `gamma`-energy of `Phi_n(Y(t)) dt` on `I`. The mass is a trapezoid sum; for the
/// energy `Phi_n` is taken constant on each cell (mean of its end values) and each cell pair
/// is integrated exactly against `|s - t|^-gamma`.
pub fn energy_report(traj: &TrajectoryGrid<f64>, (a, b): (f64, f64), n: u32, gamma: f64) -> Result<EnergyReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::OutOfRange(format!("gamma = {gamma} outside (0, 1)")));
    }
    if n == 0 {
        return Err(Error::OutOfRange("n must be at least 1".into()));
    }
    let (i0, i1) = traj.index_range(a, b).ok_or_else(|| Error::OutOfRange("interval outside the grid".into()))?;
    if i1 <= i0 {
        return Err(Error::Insufficient("interval holds fewer than two samples".into()));
    }
    let h = traj.step;
    let phi: Vec<f64> = traj.values[i0..=i1].iter().map(|&y| phi_n(n, y)).collect();
    let cells: Vec<f64> = phi.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    let mass = h * cells.iter().sum::<f64>();
    let w: Vec<f64> = (0..cells.len()).map(|d| cell_pair_weight(d, gamma)).collect();
    let energy = h.powf(2.0 - gamma) * pair_sum(&cells, &w);
    let len = h * cells.len() as f64;
    let energy_bound = 2.0 * std::f64::consts::PI * n as f64 * 2.0 * riesz_antiderivative(len, gamma);
    Ok(EnergyReport { n, gamma, interval: (traj.t(i0), traj.t(i1)), mass, energy, energy_bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, f: impl Fn(f64) -> f64) -> TrajectoryGrid<f64> {
        TrajectoryGrid::from_fn(1.0, 1.0 / n as f64, n + 1, f).unwrap()
    }

    #[test]
    fn zero_input_is_exact() {
        let tr = grid(1000, |_| 0.0);
        let r = energy_report(&tr, (1.0, 2.0), 64, 0.5).unwrap();
        let c = (2.0 * std::f64::consts::PI * 64.0).sqrt();
        assert!((r.mass - c).abs() < 1e-10 * c);
        assert!((r.energy - r.energy_bound).abs() < 1e-9 * r.energy_bound);
        // int int_{[0,1]^2} |s - t|^-1/2 = 8/3
        assert!((r.energy_bound - 2.0 * std::f64::consts::PI * 64.0 * 8.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn fft_path_matches_direct() {
        let c: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.01).sin().abs()).collect();
        let w: Vec<f64> = (0..5000).map(|d| cell_pair_weight(d, 0.3)).collect();
        let direct = {
            let mut t = 0.0;
            for a in 0..c.len() {
                for b in 0..c.len() {
                    t += c[a] * c[b] * w[a.abs_diff(b)];
                }
            }
            t
        };
        let fast = pair_sum(&c, &w);
        assert!((fast - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn bounded_and_monotone_in_gamma() {
        let tr = grid(2000, |t| (7.0 * t).sin() * 0.2);
        let mut prev = 0.0;
        for g in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let r = energy_report(&tr, (1.0, 2.0), 16, g).unwrap();
            assert!(r.energy <= r.energy_bound && r.mass >= 0.0);
            assert!(r.energy > prev);
            prev = r.energy;
        }
        assert!(energy_report(&tr, (1.0, 2.0), 16, 1.0).is_err());
    }
}
