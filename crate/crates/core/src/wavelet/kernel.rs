use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::meyer::{inverse_transform, MeyerWavelet, RING_HI, RING_LO};
use crate::error::{Error, Result};
use crate::special::{binomial, digamma, ln_gamma, polygamma};

/// Which fractional-primitive kernel a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// `Psi(y, theta) = int (y - x)_+^(theta - 1/2) psi(x) dx`.
    Synthesis,
    /// The analysis kernel biorthogonal to `Psi`.
    Dual,
}

pub const MAX_ORDER: usize = 4;

/// Uniform grid of Hurst values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for ThetaGrid {
    fn default() -> Self {
        ThetaGrid { lo: 0.05, hi: 0.95, count: 37 }
    }
}

impl ThetaGrid {
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo && theta <= self.hi
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.hi < 1.0 && self.lo < self.hi) {
            return Err(Error::OutOfRange(format!("theta grid [{}, {}] must lie inside (0, 1)", self.lo, self.hi)));
        }
        if self.count < 4 {
            return Err(Error::OutOfRange(format!("theta grid needs at least 4 nodes, got {}", self.count)));
        }
        Ok(())
    }
}

/// Cubic Lagrange weights for nodes at 0, 1, 2, 3 evaluated at `x`.
#[inline]
pub(crate) fn lagrange4(x: f64) -> [f64; 4] {
    let a = x - 1.0;
    let b = x - 2.0;
    let c = x - 3.0;
    [-a * b * c / 6.0, x * b * c / 2.0, -x * a * c / 2.0, x * a * b / 6.0]
}

#[inline]
fn stencil(u: f64, n: usize) -> (usize, [f64; 4]) {
    let i0 = (u.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    (i0, lagrange4(u - i0 as f64))
}

/// Complete Bell polynomial `B_n(g_1, ..., g_n)`.
fn bell(n: usize, g: &[Complex64; MAX_ORDER]) -> Complex64 {
    let mut b = [Complex64::new(1.0, 0.0); MAX_ORDER + 1];
    for k in 0..n {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..=k {
            s += binomial(k as u32, i as u32) * b[k - i] * g[i];
        }
        b[k + 1] = s;
    }
    b[n]
}

/// Spectral multiplier of `d^m/dy^m d^n/dtheta^n` of the kernel, excluding the `psi_hat` factor.
pub fn spectral_factor(which: KernelKind, m: usize, n: usize, theta: f64, xi: f64) -> Complex64 {
    if xi == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let alpha = theta + 0.5;
    let w = xi.abs();
    let sgn = xi.signum();
    let lw = w.ln();
    let phase = Complex64::from_polar(1.0, -sgn * alpha * PI / 2.0);
    let rot = Complex64::new(0.0, -sgn * PI / 2.0);
    let (base, g1, sign) = match which {
        KernelKind::Synthesis => ((ln_gamma(alpha) - alpha * lw).exp(), Complex64::new(digamma(alpha) - lw, 0.0) + rot, 1.0),
        KernelKind::Dual => ((alpha * lw - ln_gamma(alpha)).exp(), Complex64::new(lw - digamma(alpha), 0.0) + rot, -1.0),
    };
    let mut g = [Complex64::new(0.0, 0.0); MAX_ORDER];
    g[0] = g1;
    for (k, gk) in g.iter_mut().enumerate().take(n).skip(1) {
        *gk = Complex64::new(sign * polygamma(k as u32, alpha), 0.0);
    }
    let dy = Complex64::new(0.0, xi).powu(m as u32);
    phase * base * bell(n, &g) * dy
}

/// Tabulated `d^m/dy^m d^n/dtheta^n` of a kernel on `[-y_max, y_max] x theta-grid`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub which: KernelKind,
    pub dy_order: usize,
    pub dtheta_order: usize,
    pub dy: f64,
    pub ny_half: usize,
    pub theta: ThetaGrid,
    /// Row-major by `y`: `values[iy * theta.count + itheta]`.
    pub values: Vec<f64>,
    pub tail_constant: f64,
    pub imag_residue: f64,
    /// Bound on the aliasing of the discrete transform inside the tabulated range.
    pub periodization_bound: f64,
    pub(crate) tail_left: Vec<f64>,
    pub(crate) tail_right: Vec<f64>,
}

fn check_orders(m: usize, n: usize) -> Result<()> {
    if m > MAX_ORDER || n > MAX_ORDER {
        return Err(Error::UnsupportedOrder(format!("(m, n) = ({m}, {n}); both must be <= {MAX_ORDER}")));
    }
    Ok(())
}

fn column_with(
    wavelet: &MeyerWavelet,
    fft: &dyn Fft<f64>,
    which: KernelKind,
    m: usize,
    n: usize,
    theta: f64,
    ny_half: usize,
) -> (Vec<f64>, f64) {
    let win = &wavelet.window;
    let size = win.freq_samples;
    let dxi = win.dxi();
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    let kmax = (RING_HI / dxi).ceil() as usize + 1;
    let kmin = (RING_LO / dxi).floor() as usize;
    for k in kmin..=kmax.min(size / 2 - 1) {
        for &s in &[1.0, -1.0] {
            let xi = s * k as f64 * dxi;
            let psi = win.psi_hat(xi);
            if psi.norm() == 0.0 {
                continue;
            }
            let idx = if s > 0.0 { k } else { size - k };
            buf[idx] = psi * spectral_factor(which, m, n, theta, xi);
        }
    }
    let (full, imag) = inverse_transform(win, buf, fft);
    let c = size / 2;
    (full[c - ny_half..=c + ny_half].to_vec(), imag)
}

/// One theta-column of a kernel table on `[-ny_half dy, ny_half dy]`.
pub fn kernel_column(
    wavelet: &MeyerWavelet,
    which: KernelKind,
    m: usize,
    n: usize,
    theta: f64,
    ny_half: usize,
) -> Result<Vec<f64>> {
    check_orders(m, n)?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::OutOfRange(format!("theta {theta} outside (0, 1)")));
    }
    let fft = FftPlanner::new().plan_fft_inverse(wavelet.window.freq_samples);
    Ok(column_with(wavelet, fft.as_ref(), which, m, n, theta, ny_half).0)
}

pub fn build_kernel_table(
    wavelet: &MeyerWavelet,
    which: KernelKind,
    m: usize,
    n: usize,
    y_max: f64,
    theta: ThetaGrid,
) -> Result<KernelTable> {
    check_orders(m, n)?;
    theta.validate()?;
    let win = &wavelet.window;
    let dy = win.dy();
    let ny_half = (y_max / dy).round() as usize;
    if ((ny_half as f64) * dy - y_max).abs() > 1e-9 * y_max.max(1.0) || ny_half < 4 {
        return Err(Error::OutOfRange(format!("y_max {y_max} is not a multiple of the spatial step {dy}")));
    }
    if 4.0 * y_max > win.period() {
        return Err(Error::GridTooCoarse(format!(
            "y range {y_max} exceeds a quarter of the transform period {}",
            win.period()
        )));
    }
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_inverse(win.freq_samples);
    let cols: Vec<(Vec<f64>, f64)> = (0..theta.count)
        .into_par_iter()
        .map(|i| column_with(wavelet, fft.as_ref(), which, m, n, theta.node(i), ny_half))
        .collect();
    let ny = 2 * ny_half + 1;
    let nt = theta.count;
    let mut values = vec![0.0; ny * nt];
    let mut imag_residue: f64 = 0.0;
    for (it, (col, im)) in cols.iter().enumerate() {
        imag_residue = imag_residue.max(*im);
        for (iy, v) in col.iter().enumerate() {
            values[iy * nt + it] = *v;
        }
    }
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::OutOfRange(format!("non-finite table value at flat index {bad}")));
    }
    let mut tail_constant: f64 = 0.0;
    for iy in 0..ny {
        let y = iy as f64 * dy - y_max;
        let w = (2.0 + y.abs()).powi(2);
        for it in 0..nt {
            tail_constant = tail_constant.max(w * values[iy * nt + it].abs());
        }
    }
    let fit = |iy: usize, it: usize| {
        let y = iy as f64 * dy - y_max;
        values[iy * nt + it] * (2.0 + y.abs()).powi(2)
    };
    let tail_left: Vec<f64> = (0..nt).map(|it| 0.5 * (fit(0, it) + fit(1, it))).collect();
    let tail_right: Vec<f64> = (0..nt).map(|it| 0.5 * (fit(ny - 1, it) + fit(ny - 2, it))).collect();

    // aliasing estimate from the decay observed between y_max / 2 and y_max
    let env = |lo: usize| -> f64 {
        let mut e: f64 = 0.0;
        for iy in (0..=lo).chain(ny - 1 - lo..ny) {
            for it in 0..nt {
                e = e.max(values[iy * nt + it].abs());
            }
        }
        e
    };
    let e_edge = env(0).max(f64::MIN_POSITIVE);
    let e_half = env(ny_half / 2).max(e_edge);
    let rate = (e_half / e_edge).log2().max(2.0);
    let gap = win.period() - y_max;
    let periodization_bound = 2.0 * e_edge * (gap / y_max).powf(-rate) * (1.0 + 1.0 / (rate - 1.0));

    Ok(KernelTable {
        which,
        dy_order: m,
        dtheta_order: n,
        dy,
        ny_half,
        theta,
        values,
        tail_constant,
        imag_residue,
        periodization_bound,
        tail_left,
        tail_right,
    })
}

impl KernelTable {
    /// The same table multiplied by `factor`, tails included.
    pub fn scaled(&self, factor: f64) -> KernelTable {
        let mut t = self.clone();
        t.values.iter_mut().chain(t.tail_left.iter_mut()).chain(t.tail_right.iter_mut()).for_each(|v| *v *= factor);
        t.tail_constant *= factor.abs();
        t
    }

    pub fn y_max(&self) -> f64 {
        self.ny_half as f64 * self.dy
    }

    pub fn ny(&self) -> usize {
        2 * self.ny_half + 1
    }

    pub fn node_y(&self, iy: usize) -> f64 {
        (iy as f64 - self.ny_half as f64) * self.dy
    }

    #[inline]
    pub fn value(&self, iy: usize, it: usize) -> f64 {
        self.values[iy * self.theta.count + it]
    }

    pub fn column(&self, it: usize) -> Vec<f64> {
        (0..self.ny()).map(|iy| self.value(iy, it)).collect()
    }

    /// Interpolation stencil in theta; panics-free only for theta inside the grid.
    #[inline]
    pub fn theta_stencil(&self, theta: f64) -> (usize, [f64; 4]) {
        stencil((theta - self.theta.lo) / self.theta.step(), self.theta.count)
    }

    /// Interpolation stencil in y, or `None` outside the tabulated range.
    #[inline]
    pub fn y_stencil(&self, y: f64) -> Option<(usize, [f64; 4])> {
        if y.abs() > self.y_max() {
            return None;
        }
        Some(stencil(y / self.dy + self.ny_half as f64, self.ny()))
    }

    /// Tensor-product contraction of a 4 x 4 block of nodes.
    #[inline]
    pub fn contract(&self, iy0: usize, wy: &[f64; 4], it0: usize, wt: &[f64; 4]) -> f64 {
        let nt = self.theta.count;
        let mut acc = 0.0;
        for (a, wa) in wy.iter().enumerate() {
            let row = &self.values[(iy0 + a) * nt + it0..(iy0 + a) * nt + it0 + 4];
            acc += wa * (row[0] * wt[0] + row[1] * wt[1] + row[2] * wt[2] + row[3] * wt[3]);
        }
        acc
    }

    /// Tail model `C(theta) (2 + |y|)^-2` for `|y| > y_max`, clamped by the tail constant.
    pub fn tail_value(&self, y: f64, it0: usize, wt: &[f64; 4]) -> f64 {
        let coef = if y < 0.0 { &self.tail_left } else { &self.tail_right };
        let c: f64 = (0..4).map(|b| coef[it0 + b] * wt[b]).sum();
        c.clamp(-self.tail_constant, self.tail_constant) / (2.0 + y.abs()).powi(2)
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        if !self.theta.contains(theta) {
            return Err(Error::OutOfRange(format!(
                "theta {theta} outside table range [{}, {}]",
                self.theta.lo, self.theta.hi
            )));
        }
        Ok(())
    }

    /// Interpolated kernel value; outside the y-range the signed tail model is used.
    pub fn eval(&self, y: f64, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        Ok(self.eval_unchecked(y, theta))
    }

    #[inline]
    pub fn eval_unchecked(&self, y: f64, theta: f64) -> f64 {
        let (it0, wt) = self.theta_stencil(theta);
        match self.y_stencil(y) {
            Some((iy0, wy)) => self.contract(iy0, &wy, it0, &wt),
            None => self.tail_value(y, it0, &wt),
        }
    }

    /// Trapezoidal integral over the tabulated range at a theta node.
    pub fn first_moment(&self, it: usize) -> f64 {
        let ny = self.ny();
        let s: f64 = (0..ny).map(|iy| self.value(iy, it)).sum::<f64>() - 0.5 * (self.value(0, it) + self.value(ny - 1, it));
        s * self.dy
    }

    /// `sup |value|` over nodes with `|y| >= r`, across all theta nodes.
    pub fn envelope(&self) -> Vec<f64> {
        let nt = self.theta.count;
        let mut env = vec![0.0f64; self.ny_half + 1];
        for iy in 0..self.ny() {
            let r = (iy as isize - self.ny_half as isize).unsigned_abs();
            let row = &self.values[iy * nt..(iy + 1) * nt];
            let m = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            env[r] = env[r].max(m);
        }
        for r in (0..self.ny_half).rev() {
            env[r] = env[r].max(env[r + 1]);
        }
        env
    }

    /// Largest fitted tail coefficient `|C|` over both sides and all theta nodes.
    pub fn tail_coefficient(&self) -> f64 {
        self.tail_left.iter().chain(self.tail_right.iter()).fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// Convenience wrapper matching the table operation signature.
pub fn eval_kernel(table: &KernelTable, y: f64, theta: f64) -> Result<f64> {
    table.eval(y, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, integrate_endpoints, Endpoint, Tolerance};
    use crate::wavelet::{build_meyer_wavelet, SynthesisConfig};
    use std::sync::OnceLock;

    fn wavelet() -> &'static MeyerWavelet {
        static W: OnceLock<MeyerWavelet> = OnceLock::new();
        W.get_or_init(|| build_meyer_wavelet(SynthesisConfig::coarse().window).unwrap())
    }

    fn table(which: KernelKind, m: usize, n: usize) -> KernelTable {
        build_kernel_table(wavelet(), which, m, n, 64.0, ThetaGrid::default()).unwrap()
    }

    #[test]
    fn half_is_plain_division() {
        for xi in [2.5, -3.0, 7.9] {
            let f = spectral_factor(KernelKind::Synthesis, 0, 0, 0.5, xi);
            assert!((f.norm() - 1.0 / xi.abs()).abs() < 1e-14);
            let d = spectral_factor(KernelKind::Dual, 0, 0, 0.5, xi);
            assert!(((f * d).norm() - 1.0).abs() < 1e-14);
        }
        assert_eq!(spectral_factor(KernelKind::Synthesis, 0, 1, 0.3, 0.0).norm(), 0.0);
    }

    #[test]
    fn nodes_and_tail() {
        let t = table(KernelKind::Synthesis, 0, 0);
        for &(iy, it) in &[(100usize, 3usize), (t.ny_half, 20), (t.ny() - 7, 36)] {
            let v = t.eval(t.node_y(iy), t.theta.node(it)).unwrap();
            assert!((v - t.value(iy, it)).abs() < 1e-12);
        }
        let y = 10.0 * t.y_max();
        let v = t.eval(y, t.theta.lo).unwrap();
        assert!(v.abs() <= t.tail_constant * (2.0 + y).powi(-2));
        assert!(t.values.iter().all(|v| v.is_finite()) && t.tail_constant.is_finite());
        assert!(t.eval(0.0, 0.99).is_err());
    }

    #[test]
    fn theta_derivative_matches_differences() {
        let h = 1e-4;
        for n in 1..3 {
            for &th in &[0.3, 0.65] {
                let exact = kernel_column(wavelet(), KernelKind::Synthesis, 0, n, th, 512).unwrap();
                let up = kernel_column(wavelet(), KernelKind::Synthesis, 0, n - 1, th + h, 512).unwrap();
                let dn = kernel_column(wavelet(), KernelKind::Synthesis, 0, n - 1, th - h, 512).unwrap();
                let scale = exact.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                for i in 0..exact.len() {
                    let fd = (up[i] - dn[i]) / (2.0 * h);
                    assert!((fd - exact[i]).abs() <= 1e-5 * scale, "n {n} theta {th} i {i}");
                }
            }
        }
    }

    #[test]
    fn y_derivative_matches_differences() {
        // eighth-order central differences on the spatial grid
        const C: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let dy = wavelet().window.dy();
        let f = kernel_column(wavelet(), KernelKind::Dual, 0, 0, 0.45, 600).unwrap();
        let d = kernel_column(wavelet(), KernelKind::Dual, 1, 0, 0.45, 600).unwrap();
        let scale = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 4..f.len() - 4 {
            let fd: f64 = (0..4).map(|r| C[r] * (f[i + r + 1] - f[i - r - 1])).sum::<f64>() / dy;
            assert!((fd - d[i]).abs() <= 1e-5 * scale, "i {i}: {fd} vs {}", d[i]);
        }
    }

    fn psi_direct(x: f64) -> f64 {
        let win = &wavelet().window;
        let tol = Tolerance::new(1e-13, 1e-12);
        let g = |xi: f64| (win.psi_hat(xi) * Complex64::from_polar(1.0, xi * x)).re;
        integrate(&g, RING_LO, RING_HI, tol).unwrap().value / PI
    }

    #[test]
    fn matches_fractional_integral() {
        let t = table(KernelKind::Synthesis, 0, 0);
        let tol = Tolerance::new(1e-9, 1e-9);
        for &(y, th) in &[(0.3, 0.5), (-0.85, 0.3), (1.6, 0.72), (0.05, 0.18), (2.4, 0.41)] {
            let a = th - 0.5;
            // int_0^L v^a psi(y - v) dv; psi decays like |x|^-4
            let f = |v: f64| if v <= 0.0 { 0.0 } else { v.powf(a) * psi_direct(y - v) };
            let direct = integrate_endpoints(&f, 0.0, 80.0, Endpoint::Singular(a), Endpoint::Regular, tol).unwrap().value;
            let v = t.eval(y, th).unwrap();
            assert!((v - direct).abs() <= 1e-4 * direct.abs(), "y {y} theta {th}: {v} vs {direct}");
        }
    }

    #[test]
    fn order_cap() {
        assert!(matches!(kernel_column(wavelet(), KernelKind::Synthesis, 5, 0, 0.5, 8), Err(Error::UnsupportedOrder(_))));
        assert!(kernel_column(wavelet(), KernelKind::Synthesis, 0, 0, 1.0, 8).is_err());
    }
}
