use super::kernel::{KernelKind, KernelTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct PairingOptions {
    /// Half-width, in units of the finer atom, of the integration range.
    pub radius: f64,
    /// Quadrature points per unit are `2^(max(j, j') + extra_levels)`.
    pub extra_levels: u32,
}

impl Default for PairingOptions {
    fn default() -> Self {
        PairingOptions { radius: 64.0, extra_levels: 6 }
    }
}

const MAX_POINTS: f64 = (1u64 << 22) as f64;

/// `2^((j + j') / 2) int Psi(2^j' t - k', theta) Psi~(2^j t - k, theta) dt` by the trapezoidal rule.
pub fn verify_kernel_pairing(
    psi: &KernelTable,
    dual: &KernelTable,
    theta: f64,
    (j, k): (i32, i64),
    (j2, k2): (i32, i64),
) -> Result<f64> {
    verify_kernel_pairing_with(psi, dual, theta, (j, k), (j2, k2), PairingOptions::default())
}

pub fn verify_kernel_pairing_with(
    psi: &KernelTable,
    dual: &KernelTable,
    theta: f64,
    (j, k): (i32, i64),
    (j2, k2): (i32, i64),
    opts: PairingOptions,
) -> Result<f64> {
    if psi.which != KernelKind::Synthesis || dual.which != KernelKind::Dual {
        return Err(Error::OutOfRange("pairing needs a synthesis and a dual table".into()));
    }
    if psi.dy_order + psi.dtheta_order + dual.dy_order + dual.dtheta_order != 0 {
        return Err(Error::UnsupportedOrder("pairing is defined for the underived kernels".into()));
    }
    psi.check_theta(theta)?;
    dual.check_theta(theta)?;
    if j.abs() > 30 || j2.abs() > 30 {
        return Err(Error::OutOfRange(format!("scales ({j}, {j2}) cannot be resolved")));
    }
    let (jf, kf) = if j >= j2 { (j, k) } else { (j2, k2) };
    let scale_f = 2f64.powi(jf);
    let lo = (kf as f64 - opts.radius) / scale_f;
    let hi = (kf as f64 + 1.0 + opts.radius) / scale_f;
    let h = 2f64.powi(-(jf + opts.extra_levels as i32));
    let npts = ((hi - lo) / h).ceil();
    if npts > MAX_POINTS {
        return Err(Error::OutOfRange(format!("pair ({j},{k}) / ({j2},{k2}) needs {npts} quadrature points")));
    }
    let npts = npts as usize;
    let (a, b) = (2f64.powi(j), 2f64.powi(j2));
    let (pt0, pw) = psi.theta_stencil(theta);
    let (dt0, dw) = dual.theta_stencil(theta);
    let eval = |tab: &KernelTable, y: f64, t0: usize, w: &[f64; 4]| match tab.y_stencil(y) {
        Some((iy0, wy)) => tab.contract(iy0, &wy, t0, w),
        None => tab.tail_value(y, t0, w),
    };
    let mut sum = 0.0;
    for i in 0..=npts {
        let t = lo + i as f64 * h;
        let wt = if i == 0 || i == npts { 0.5 } else { 1.0 };
        let v = eval(psi, b * t - k2 as f64, pt0, &pw) * eval(dual, a * t - k as f64, dt0, &dw);
        sum += wt * v;
    }
    Ok(sum * h * 2f64.powf(0.5 * (j + j2) as f64))
}
