use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{covariance, lnd_bound, oracle_tolerance, Interval, WienerKernel};
use crate::error::{Error, Result};
use crate::hoelder::HProfile;

/// Covariance matrix of `Y` at a list of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovMatrix {
    pub points: Vec<f64>,
    pub h_values: Vec<f64>,
    pub entries: Vec<Vec<f64>>,
    /// Largest quadrature error among the entries.
    pub error: f64,
}

impl CovMatrix {
    pub fn assemble(profile: &HProfile, points: &[f64]) -> Result<Self> {
        let n = points.len();
        let kernels: Vec<WienerKernel<f64>> = points.iter().map(|&s| WienerKernel::y_at(profile, s)).collect();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let vals = pairs
            .par_iter()
            .map(|&(i, j)| covariance(&kernels[i], &kernels[j], oracle_tolerance()))
            .collect::<Result<Vec<_>>>()?;
        let mut entries = vec![vec![0.0; n]; n];
        let mut error = 0.0f64;
        for (&(i, j), q) in pairs.iter().zip(&vals) {
            entries[i][j] = q.value;
            entries[j][i] = q.value;
            error = error.max(q.error);
        }
        let h_values = points.iter().map(|&s| profile.eval(s)).collect();
        Ok(CovMatrix { points: points.to_vec(), h_values, entries, error })
    }

    pub fn trace(&self) -> f64 {
        (0..self.entries.len()).map(|i| self.entries[i][i]).sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.entries.len();
        if n == 0 {
            return 0.0;
        }
        let m = DMatrix::from_fn(n, n, |i, j| self.entries[i][j]);
        SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Smallest eigenvalue at least `-1e-10 trace`.
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -1e-10 * self.trace()
    }
}

/// Solves `(a + ridge I) x = b` by Cholesky, adding `ridge = 1e-12 trace` only when the plain
/// factorisation breaks down. Returns the solution and the ridge used.
pub fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = b.len();
    let trace: f64 = (0..n).map(|i| a[i][i]).sum();
    for ridge in [0.0, 1e-12 * trace] {
        if let Some(l) = factor(a, ridge) {
            let mut y = b.to_vec();
            for i in 0..n {
                for k in 0..i {
                    y[i] -= l[i][k] * y[k];
                }
                y[i] /= l[i][i];
            }
            for i in (0..n).rev() {
                for k in i + 1..n {
                    y[i] -= l[k][i] * y[k];
                }
                y[i] /= l[i][i];
            }
            return Ok((y, ridge));
        }
    }
    Err(Error::Singular(format!("covariance matrix of size {n} is singular beyond the ridge 1e-12 trace")))
}

fn factor(a: &[Vec<f64>], ridge: f64) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j] + if i == j { ridge } else { 0.0 };
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 1e-14 * a[i][i].abs()) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalVariance {
    /// `Var(Y(s_n) | Y(s_1), ..., Y(s_{n-1}))`.
    pub value: f64,
    /// `2^-1 d^(2 H(s_n)) log^2 d` with `d` the last gap, or the variance floor when `n = 1`.
    pub bound: f64,
    /// Propagated quadrature error.
    pub error: f64,
    pub ridge: f64,
}

pub fn conditional_variance(profile: &HProfile, points: &[f64], interval: Interval) -> Result<ConditionalVariance> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Insufficient("no points".into()));
    }
    if let Some(&s) = points.iter().find(|&&s| !interval.contains(s)) {
        return Err(Error::OutOfRange(format!("point {s} outside [{}, {}]", interval.lo, interval.hi)));
    }
    if points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::OutOfRange("points must be strictly increasing".into()));
    }
    let m = CovMatrix::assemble(profile, points)?;
    let last = n - 1;
    let var = m.entries[last][last];
    if n == 1 {
        let bound = super::log_square_moment(interval.lo.min(1.0));
        return Ok(ConditionalVariance { value: var, bound, error: m.error, ridge: 0.0 });
    }
    let gamma: Vec<Vec<f64>> = m.entries[..last].iter().map(|r| r[..last].to_vec()).collect();
    let c: Vec<f64> = (0..last).map(|i| m.entries[i][last]).collect();
    let (x, ridge) = cholesky_solve(&gamma, &c)?;
    let quad: f64 = x.iter().zip(&c).map(|(a, b)| a * b).sum();
    // first-order propagation of the entry errors through var - c^T G^-1 c
    let gain = 1.0 + 2.0 * x.iter().map(|v| v.abs()).sum::<f64>() + x.iter().map(|v| v.abs()).sum::<f64>().powi(2);
    let gap = points[last] - points[last - 1];
    Ok(ConditionalVariance {
        value: var - quad,
        bound: lnd_bound(gap, profile.eval(points[last])),
        error: m.error * gain,
        ridge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_small_system() {
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let (x, ridge) = cholesky_solve(&a, &[2.0, 1.0]).unwrap();
        assert_eq!(ridge, 0.0);
        assert!((x[0] - 0.5).abs() < 1e-14 && x[1].abs() < 1e-14);
        assert!(cholesky_solve(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn matrix_is_psd() {
        let h = HProfile::remark_preset();
        let m = CovMatrix::assemble(&h, &[1.1, 1.15, 1.5, 1.8]).unwrap();
        assert!(m.is_psd());
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.entries[i][j], m.entries[j][i]);
            }
        }
    }
}
