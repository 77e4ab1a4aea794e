//! Adaptive Gauss-Kronrod (7/15) integration with endpoint power substitutions for
//! algebraic-logarithmic singularities and a rational map for semi-infinite ranges.

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance<R> {
    pub abs: R,
    pub rel: R,
    pub max_segments: usize,
}

impl<R: Real> Tolerance<R> {
    pub fn new(abs: R, rel: R) -> Self {
        Tolerance { abs, rel, max_segments: 4000 }
    }

    pub fn halved(self) -> Self {
        Tolerance { abs: self.abs * R::c(0.5), rel: self.rel * R::c(0.5), ..self }
    }
}

impl<R: Real> Default for Tolerance<R> {
    fn default() -> Self {
        let eps = R::epsilon();
        Tolerance::new(R::c(1e-10).max(eps * R::c(64.0)), R::c(1e-10).max(eps * R::c(64.0)))
    }
}

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad<R> {
    pub value: R,
    pub error: R,
    pub evals: usize,
}

impl<R: Real> std::ops::Add for Quad<R> {
    type Output = Quad<R>;
    fn add(self, o: Quad<R>) -> Quad<R> {
        Quad { value: self.value + o.value, error: self.error + o.error, evals: self.evals + o.evals }
    }
}

/// Behaviour of the integrand at a finite endpoint: `Singular(beta)` means it behaves
/// like `|x - endpoint|^beta` (possibly times logarithms), `beta > -1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint<R> {
    Regular,
    Singular(R),
}

fn gk15<R: Real, F: Fn(R) -> R>(f: &F, a: R, b: R) -> (R, R) {
    let half = (b - a) * R::c(0.5);
    let center = (a + b) * R::c(0.5);
    let fc = f(center);
    let mut kron = fc * R::c(WGK[7]);
    let mut gauss = fc * R::c(WG[3]);
    for i in 0..7 {
        let dx = half * R::c(XGK[i]);
        let s = f(center - dx) + f(center + dx);
        kron = kron + s * R::c(WGK[i]);
        if i % 2 == 1 {
            gauss = gauss + s * R::c(WG[i / 2]);
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Globally adaptive integration over a finite interval.
pub fn integrate<R: Real, F: Fn(R) -> R>(f: &F, a: R, b: R, tol: Tolerance<R>) -> Result<Quad<R>> {
    if a == b {
        return Ok(Quad { value: R::zero(), error: R::zero(), evals: 0 });
    }
    let (v, e) = gk15(f, a, b);
    let mut segs = vec![(a, b, v, e)];
    let mut evals = 15;
    loop {
        let total: R = segs.iter().fold(R::zero(), |s, x| s + x.2);
        let err: R = segs.iter().fold(R::zero(), |s, x| s + x.3);
        if !total.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{a:?}, {b:?}]")));
        }
        let target = tol.abs.max(tol.rel * total.abs());
        if err <= target {
            return Ok(Quad { value: total, error: err, evals });
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .fold((0, R::zero()), |best, (i, s)| if s.3 > best.1 { (i, s.3) } else { best });
        let (sa, sb, _, se) = segs[idx];
        let mid = (sa + sb) * R::c(0.5);
        let too_small = (sb - sa).abs() <= R::epsilon() * R::c(64.0) * sa.abs().max(sb.abs()).max(R::one());
        if segs.len() >= tol.max_segments || too_small {
            if err <= target * R::c(100.0) || se <= R::epsilon() * total.abs() * R::c(1e3) {
                return Ok(Quad { value: total, error: err, evals });
            }
            return Err(Error::Quadrature(format!(
                "no convergence on [{a:?}, {b:?}]: estimate {total:?}, error {err:?}"
            )));
        }
        let (v1, e1) = gk15(f, sa, mid);
        let (v2, e2) = gk15(f, mid, sb);
        evals += 30;
        segs[idx] = (sa, mid, v1, e1);
        segs.push((mid, sb, v2, e2));
    }
}

fn power_for<R: Real>(beta: R) -> R {
    (R::c(3.0) / (beta + R::one())).max(R::one())
}

/// Integration over `[a, b]` with optional algebraic endpoint singularities, removed by
/// the substitution `x = a + (m - a) u^p` (and its mirror) on each half.
pub fn integrate_endpoints<R: Real, F: Fn(R) -> R>(
    f: &F,
    a: R,
    b: R,
    left: Endpoint<R>,
    right: Endpoint<R>,
    tol: Tolerance<R>,
) -> Result<Quad<R>> {
    if a == b {
        return Ok(Quad { value: R::zero(), error: R::zero(), evals: 0 });
    }
    let m = (a + b) * R::c(0.5);
    let half_tol = Tolerance { abs: tol.abs * R::c(0.5), ..tol };
    let lq = match left {
        Endpoint::Regular => integrate(f, a, m, half_tol)?,
        Endpoint::Singular(beta) => {
            let p = power_for(beta);
            let w = m - a;
            let g = |u: R| {
                if u <= R::zero() {
                    return R::zero();
                }
                f(a + w * u.powf(p)) * p * w * u.powf(p - R::one())
            };
            integrate(&g, R::zero(), R::one(), half_tol)?
        }
    };
    let rq = match right {
        Endpoint::Regular => integrate(f, m, b, half_tol)?,
        Endpoint::Singular(beta) => {
            let p = power_for(beta);
            let w = b - m;
            let g = |u: R| {
                if u <= R::zero() {
                    return R::zero();
                }
                f(b - w * u.powf(p)) * p * w * u.powf(p - R::one())
            };
            integrate(&g, R::zero(), R::one(), half_tol)?
        }
    };
    Ok(lq + rq)
}

/// `int_{-inf}^{b} f` for an integrand decaying like `|x|^-decay` (`decay > 1`), through
/// `x = b + 1 - 1/w`.
pub fn integrate_lower_tail<R: Real, F: Fn(R) -> R>(f: &F, b: R, decay: R, tol: Tolerance<R>) -> Result<Quad<R>> {
    if decay <= R::one() {
        return Err(Error::Quadrature(format!("tail decay exponent {decay:?} is not integrable")));
    }
    let g = |w: R| {
        if w <= R::zero() {
            return R::zero();
        }
        let x = b + R::one() - w.recip();
        f(x) / (w * w)
    };
    integrate_endpoints(&g, R::zero(), R::one(), Endpoint::Singular(decay - R::c(2.0)), Endpoint::Regular, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q = integrate(&|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((q.value - 0.0).abs() < 1e-13);
        let q = integrate(&|x: f64| x.powi(6), -1.0, 1.0, Tolerance::default()).unwrap();
        assert!((q.value - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn oscillatory() {
        let q = integrate(&|x: f64| (20.0 * x).sin(), 0.0, 3.0, Tolerance::new(1e-12, 1e-12)).unwrap();
        let exact = (1.0 - (60.0f64).cos()) / 20.0;
        assert!((q.value - exact).abs() < 1e-11);
    }

    #[test]
    fn power_log_singularity() {
        // int_0^1 v^a log^2 v dv = 2/(a+1)^3
        for &a in &[-0.6, -0.3, 0.0, 0.4] {
            let f = |v: f64| if v <= 0.0 { 0.0 } else { v.powf(a) * v.ln().powi(2) };
            let q = integrate_endpoints(&f, 0.0, 1.0, Endpoint::Singular(a), Endpoint::Regular, Tolerance::new(1e-12, 1e-12))
                .unwrap();
            let exact = 2.0 / (a + 1.0f64).powi(3);
            assert!((q.value - exact).abs() < 1e-9, "a={a}: {} vs {exact}", q.value);
        }
    }

    #[test]
    fn lower_tail() {
        // int_{-inf}^{-1} x^-2 dx = 1
        let q = integrate_lower_tail(&|x: f64| 1.0 / (x * x), -1.0, 2.0, Tolerance::new(1e-12, 1e-12)).unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
        // slow decay |x|^-1.3
        let q = integrate_lower_tail(&|x: f64| (-x).powf(-1.3), -1.0, 1.3, Tolerance::new(1e-11, 1e-11)).unwrap();
        assert!((q.value - 1.0 / 0.3).abs() < 1e-8, "{}", q.value);
    }

    #[test]
    fn single_precision() {
        let q = integrate(&|x: f32| x.exp(), 0.0f32, 1.0, Tolerance::default()).unwrap();
        assert!((q.value - (std::f32::consts::E - 1.0)).abs() < 1e-5);
    }
}
