use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::binomial;

/// Lower and upper edges of the spectral ring carrying the Meyer wavelet.
pub const RING_LO: f64 = 2.0 * PI / 3.0;
pub const RING_HI: f64 = 8.0 * PI / 3.0;

/// Frequency-domain window defining the Meyer wavelet and its sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeyerWindow {
    /// Order `r` of the polynomial taper (degree `2r + 1`).
    pub smoothing_order: usize,
    pub freq_samples: usize,
    /// Half-width of the spectral grid, in radians.
    pub freq_halfwidth: f64,
}

impl Default for MeyerWindow {
    fn default() -> Self {
        MeyerWindow { smoothing_order: 3, freq_samples: 1 << 18, freq_halfwidth: 64.0 * PI }
    }
}

impl MeyerWindow {
    pub fn dxi(&self) -> f64 {
        2.0 * self.freq_halfwidth / self.freq_samples as f64
    }

    /// Spatial step of the grid dual to the spectral one.
    pub fn dy(&self) -> f64 {
        PI / self.freq_halfwidth
    }

    /// Spatial period of the discrete transform.
    pub fn period(&self) -> f64 {
        self.freq_samples as f64 * self.dy()
    }

    pub fn validate(&self) -> Result<()> {
        if self.smoothing_order < 3 {
            return Err(Error::OutOfRange(format!("smoothing order {} < 3", self.smoothing_order)));
        }
        if !self.freq_samples.is_power_of_two() || self.freq_samples < 64 {
            return Err(Error::OutOfRange(format!("freq_samples {} is not a power of two >= 64", self.freq_samples)));
        }
        if !(self.freq_halfwidth > RING_HI) {
            return Err(Error::GridTooCoarse(format!(
                "half-width {} does not contain the ring edge {RING_HI}",
                self.freq_halfwidth
            )));
        }
        let ring_nodes = (RING_HI - RING_LO) / self.dxi();
        if ring_nodes < 64.0 {
            return Err(Error::GridTooCoarse(format!("ring spans {ring_nodes:.1} spectral nodes, need 64")));
        }
        Ok(())
    }

    /// Polynomial taper: 0 below 0, 1 above 1, and `nu(x) + nu(1-x) = 1`.
    pub fn taper(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let r = self.smoothing_order as u32;
        let s: f64 = (0..=r).map(|i| binomial(r + i, i) * (1.0 - x).powi(i as i32)).sum();
        x.powi(r as i32 + 1) * s
    }

    /// Modulus `|psi_hat(xi)|` as a function of `w = |xi|`.
    pub fn modulus(&self, w: f64) -> f64 {
        let w = w.abs();
        if w <= RING_LO || w >= RING_HI {
            0.0
        } else if w <= 2.0 * RING_LO {
            (0.5 * PI * self.taper(3.0 * w / (2.0 * PI) - 1.0)).sin()
        } else {
            (0.5 * PI * self.taper(3.0 * w / (4.0 * PI) - 1.0)).cos()
        }
    }

    /// `psi_hat(xi) = exp(-i xi / 2) |psi_hat(xi)|`, with `f_hat(xi) = int exp(-i xi x) f(x) dx`.
    pub fn psi_hat(&self, xi: f64) -> Complex64 {
        let m = self.modulus(xi);
        if m == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(m, -0.5 * xi)
    }
}

/// Sampled Meyer wavelet on the spectral grid and its dual spatial grid.
#[derive(Debug, Clone)]
pub struct MeyerWavelet {
    pub window: MeyerWindow,
    /// `psi_hat` at `xi_k = k dxi`, `k = -N/2 .. N/2 - 1`.
    pub spectrum: Vec<Complex64>,
    /// `psi` at `y_l = l dy`, `l = -N/2 .. N/2 - 1`.
    pub psi: Vec<f64>,
    /// Largest imaginary part left by the inverse transform.
    pub imag_residue: f64,
}

impl MeyerWavelet {
    pub fn xi(&self, idx: usize) -> f64 {
        (idx as f64 - (self.window.freq_samples / 2) as f64) * self.window.dxi()
    }

    pub fn y(&self, idx: usize) -> f64 {
        (idx as f64 - (self.window.freq_samples / 2) as f64) * self.window.dy()
    }
}

/// Inverse transform of spectral samples stored in FFT order, returning the centred
/// spatial samples `f(l dy)`, `l = -N/2 .. N/2 - 1`, and the largest imaginary residue.
pub(crate) fn inverse_transform(window: &MeyerWindow, mut buf: Vec<Complex64>, fft: &dyn Fft<f64>) -> (Vec<f64>, f64) {
    let n = window.freq_samples;
    fft.process(&mut buf);
    let scale = 1.0 / (n as f64 * window.dy());
    let mut out = vec![0.0; n];
    let mut imag: f64 = 0.0;
    for (l, v) in buf.iter().enumerate() {
        let centred = (l + n / 2) % n;
        out[centred] = v.re * scale;
        imag = imag.max((v.im * scale).abs());
    }
    (out, imag)
}

pub fn build_meyer_wavelet(window: MeyerWindow) -> Result<MeyerWavelet> {
    window.validate()?;
    let n = window.freq_samples;
    let dxi = window.dxi();
    let spectrum: Vec<Complex64> = (0..n).map(|i| window.psi_hat((i as f64 - (n / 2) as f64) * dxi)).collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, v) in spectrum.iter().enumerate() {
        buf[(i + n / 2) % n] = *v;
    }
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let (psi, imag_residue) = inverse_transform(&window, buf, fft.as_ref());
    Ok(MeyerWavelet { window, spectrum, psi, imag_residue })
}
