use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hoelder::HProfile;
use crate::quadrature::{integrate_endpoints, integrate_lower_tail, Endpoint, Quad, Tolerance};
use crate::scalar::Real;

/// Integrands of the Wiener-integral representations of `B(t, theta)` and
/// `Y(s) = d/dtheta B(s, H(s))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WienerKernel<R> {
    /// `(t - x)_+^(theta - 1/2) - (-x)_+^(theta - 1/2)`.
    B { t: R, theta: R },
    /// `(s - x)_+^(h - 1/2) log (s - x)_+ - (-x)_+^(h - 1/2) log (-x)_+` with `h = H(s)`.
    Y { s: R, h: R },
}

/// Beyond this ratio `|x| / |t|` the difference of plus-parts uses `expm1`/`ln1p`.
const FAR_RATIO: f64 = 4.0;

impl<R: Real> WienerKernel<R> {
    pub fn y_at(profile: &HProfile, s: R) -> Self {
        WienerKernel::Y { s, h: profile.eval(s) }
    }

    /// The point and the exponent `theta - 1/2`.
    fn params(&self) -> (R, R) {
        match *self {
            WienerKernel::B { t, theta } => (t, theta - R::c(0.5)),
            WienerKernel::Y { s, h } => (s, h - R::c(0.5)),
        }
    }

    fn is_log(&self) -> bool {
        matches!(self, WienerKernel::Y { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let (t, a) = self.params();
        let th = a + R::c(0.5);
        if !(th > R::zero() && th < R::one()) || !t.is_finite() {
            return Err(Error::OutOfRange(format!("kernel parameters {self:?} outside (0, 1)")));
        }
        Ok(())
    }

    /// Value at `x`, with `(y)_+^a log (y)_+ = 0` for `y <= 0`.
    pub fn eval(&self, x: R) -> R {
        self.eval_from(x, R::zero())
    }

    /// Value at `x = c - v`. The plus-part arguments are formed as `(p - c) + v`, which keeps
    /// full relative precision as `v -> 0` when `c` is a breakpoint `p`.
    pub fn eval_from(&self, c: R, v: R) -> R {
        let (t, a) = self.params();
        let log = self.is_log();
        let plus = |u: R| {
            if u <= R::zero() {
                R::zero()
            } else if log {
                u.powf(a) * u.ln()
            } else {
                u.powf(a)
            }
        };
        let u = -c + v;
        if u > R::zero() && t != R::zero() && u > R::c(FAR_RATIO) * t.abs() {
            // (u + t)^a - u^a and its log version without cancellation
            let l = (t / u).ln_1p();
            let em = (a * l).exp_m1();
            let ua = u.powf(a);
            return if log { ua * (u.ln() * em + (a * l).exp() * l) } else { ua * em };
        }
        plus((t - c) + v) - plus(u)
    }

    fn breakpoints(&self) -> [R; 2] {
        [self.params().0, R::zero()]
    }
}

/// `int k1 k2` over the real line. The integral is split at the kernel breakpoints; each
/// piece has the algebraic singularity of the plus-parts at its right end, and the lower
/// tail decays like `|x|^(a1 + a2 - 2)`.
pub fn covariance<R: Real>(k1: &WienerKernel<R>, k2: &WienerKernel<R>, tol: Tolerance<R>) -> Result<Quad<R>> {
    k1.validate()?;
    k2.validate()?;
    let mut pts: Vec<R> = k1.breakpoints().into_iter().chain(k2.breakpoints()).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let f = |x: R| k1.eval(x) * k2.eval(x);
    let (_, a1) = k1.params();
    let (_, a2) = k2.params();
    let beta_at = |c: R| {
        let mut beta = R::zero();
        if k1.breakpoints().contains(&c) {
            beta = beta + a1.min(R::zero());
        }
        if k2.breakpoints().contains(&c) {
            beta = beta + a2.min(R::zero());
        }
        beta
    };
    let singular = |c: R| {
        let b = beta_at(c);
        // logarithms make even b = 0 worth the substitution
        Endpoint::Singular(b)
    };
    let pieces = pts.len() + 1;
    let tol_piece = Tolerance { abs: tol.abs / R::c(pieces as f64), ..tol };
    // each piece [lo, c] is integrated in the offset v = c - x, singular at v = 0
    let piece = |lo: R, c: R| {
        let g = |v: R| k1.eval_from(c, v) * k2.eval_from(c, v);
        integrate_endpoints(&g, R::zero(), c - lo, singular(c), Endpoint::Regular, tol_piece)
    };
    let lo = pts[0];
    let mut q = integrate_lower_tail(&f, lo - R::one(), R::c(2.0) - a1 - a2, tol_piece)?;
    q = q + piece(lo - R::one(), lo)?;
    for w in pts.windows(2) {
        q = q + piece(w[0], w[1])?;
    }
    if !q.value.is_finite() {
        return Err(Error::Quadrature(format!("non-finite covariance for {k1:?}, {k2:?}")));
    }
    Ok(q)
}

/// `C / 2 (|t|^(2 theta) + |s|^(2 theta) - |t - s|^(2 theta))`.
pub fn fbm_covariance_closed<R: Real>(t: R, s: R, theta: R, c: R) -> R {
    let p = R::c(2.0) * theta;
    c * R::c(0.5) * (t.abs().powf(p) + s.abs().powf(p) - (t - s).abs().powf(p))
}

/// `int_0^v u log^2 u du = v^2 / 2 (log^2 v - log v + 1/2)`.
pub fn log_square_moment<R: Real>(v: R) -> R {
    if v <= R::zero() {
        return R::zero();
    }
    let l = v.ln();
    v * v * R::c(0.5) * (l * l - l + R::c(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerance<f64> {
        Tolerance::new(1e-11, 1e-11)
    }

    #[test]
    fn kernel_values() {
        let b = WienerKernel::B { t: 1.0, theta: 0.5 };
        assert_eq!(b.eval(0.5), 1.0);
        assert_eq!(b.eval(-3.0), 0.0);
        let y = WienerKernel::Y { s: 1.0, h: 0.5 };
        assert_eq!(y.eval(1.0), 0.0);
        assert_eq!(y.eval(1.7), 0.0);
        let x = 1.0 - (-1.0f64).exp();
        assert!((y.eval(x) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn far_field_is_continuous() {
        for k in [WienerKernel::B { t: 0.7, theta: 0.3 }, WienerKernel::Y { s: 0.7, h: 0.3 }] {
            let x = -FAR_RATIO * 0.7;
            let direct = |x: f64| {
                let (t, a) = k.params();
                let p = |u: f64| if k.is_log() { u.powf(a) * u.ln() } else { u.powf(a) };
                p(t - x) - p(-x)
            };
            assert!((k.eval(x - 1e-12) - direct(x)).abs() < 1e-9);
            assert!((k.eval(x + 1e-12) - direct(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn brownian_variance() {
        let k = WienerKernel::B { t: 1.0, theta: 0.5 };
        assert!((covariance(&k, &k, tol()).unwrap().value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fbm_constant_matches_gamma_formula() {
        use statrs::function::gamma::gamma;
        for th in [0.2, 0.35, 0.7, 0.9] {
            let k = WienerKernel::B { t: 1.0, theta: th };
            let q = covariance(&k, &k, tol()).unwrap();
            let exact = gamma(th + 0.5).powi(2) / (gamma(2.0 * th + 1.0) * (std::f64::consts::PI * th).sin());
            assert!((q.value - exact).abs() < 1e-8 * exact, "theta {th}: {} vs {exact}", q.value);
        }
    }

    #[test]
    fn fbm_identity() {
        let th = 0.3;
        let k1 = WienerKernel::B { t: 1.0, theta: th };
        let k2 = WienerKernel::B { t: 2.0, theta: th };
        let c = covariance(&k1, &k1, tol()).unwrap().value;
        let cov = covariance(&k1, &k2, tol()).unwrap().value;
        assert!((cov - fbm_covariance_closed(1.0, 2.0, th, c)).abs() < 1e-6);
        assert_eq!(fbm_covariance_closed(1.5, 0.0, th, c), 0.0);
        assert!((fbm_covariance_closed(1.5, 1.5, th, c) - c * 1.5f64.powf(2.0 * th)).abs() < 1e-14);
    }

    #[test]
    fn power_log_moment() {
        // int_0^1 v^(2H-1) log^2 v dv = 2 / (2H)^3, which is 2 at H = 1/2
        let f = |v: f64| if v <= 0.0 { 0.0 } else { v.ln().powi(2) };
        let q = integrate_endpoints(&f, 0.0, 1.0, Endpoint::Singular(0.0), Endpoint::Regular, tol()).unwrap();
        assert!((q.value - 2.0).abs() < 1e-8);
        assert_eq!(log_square_moment(1.0), 0.25);
        let e = (-1.0f64).exp();
        let q = integrate_endpoints(&|v: f64| if v <= 0.0 { 0.0 } else { v * v.ln().powi(2) }, 0.0, e, Endpoint::Singular(1.0), Endpoint::Regular, tol())
            .unwrap();
        assert!((q.value - log_square_moment(e)).abs() < 1e-10);
    }

    #[test]
    fn y_variance_is_finite_and_above_floor() {
        let k = WienerKernel::Y { s: 1.3, h: 0.35 };
        let q = covariance(&k, &k, tol()).unwrap();
        assert!(q.value.is_finite() && q.value >= 0.25, "{}", q.value);
    }

    #[test]
    fn halving_tolerance_is_consistent() {
        let k1 = WienerKernel::Y { s: 1.2, h: 0.37 };
        let k2 = WienerKernel::Y { s: 1.5, h: 0.36 };
        let t = Tolerance::<f64>::new(1e-8, 1e-8);
        let a = covariance(&k1, &k2, t).unwrap();
        let b = covariance(&k1, &k2, t.halved()).unwrap();
        assert!((a.value - b.value).abs() <= a.error + b.error);
    }

    #[test]
    fn single_precision_kernel() {
        let k = WienerKernel::B { t: 1.0f32, theta: 0.5 };
        let q = covariance(&k, &k, Tolerance::default()).unwrap();
        assert!((q.value - 1.0).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_parameters() {
        let k = WienerKernel::B { t: 1.0, theta: 1.2 };
        assert!(covariance(&k, &k, tol()).is_err());
    }
}
