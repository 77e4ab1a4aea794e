//! Seeded lattice of standard normal coefficients indexed by (scale, translate), plus the
//! bookkeeping around it: truncation windows, envelope constants and local maxima.

use std::f64::consts::PI;
use std::io::Write;

use num_bigint::BigInt;
use num_traits::{Float, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::trigamma;
use crate::wavelet::KernelTable;

pub const J_LIMIT: i32 = 62;
pub const K_LIMIT: i64 = 1 << 52;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicIndex {
    pub j: i32,
    pub k: i64,
}

impl DyadicIndex {
    pub fn new(j: i32, k: i64) -> Self {
        DyadicIndex { j, k }
    }
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for a named sub-task.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = mix64(seed ^ 0x6a09_e667_f3bc_c908);
    for chunk in label.as_bytes().chunks(8) {
        let mut b = [0u8; 8];
        b[..chunk.len()].copy_from_slice(chunk);
        h = mix64(h ^ u64::from_le_bytes(b)).wrapping_add(0x9e37_79b9_7f4a_7c15);
    }
    mix64(h ^ label.len() as u64)
}

#[inline]
fn unit_open(h: u64) -> f64 {
    ((h >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn unit_closed_open(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn box_muller(h1: u64, h2: u64) -> f64 {
    (-2.0 * unit_open(h1).ln()).sqrt() * (2.0 * PI * unit_closed_open(h2)).cos()
}

/// Pure map `(seed, j, k) -> N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub seed: u64,
    keys: [u64; 4],
    zero: bool,
}

impl CoefficientField {
    pub fn new(seed: u64) -> Self {
        let keys = [
            mix64(seed ^ 0x243f_6a88_85a3_08d3),
            mix64(seed ^ 0x1319_8a2e_0370_7344),
            mix64(seed ^ 0xa409_3822_299f_31d0),
            mix64(seed ^ 0x082e_fa98_ec4e_6c89),
        ];
        CoefficientField { seed, keys, zero: false }
    }

    /// A field whose coefficients are all zero.
    pub fn zeros() -> Self {
        CoefficientField { zero: true, ..CoefficientField::new(0) }
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    #[inline]
    fn packed(j: i32, k: i64) -> u64 {
        (((j + J_LIMIT) as u64) << 54) | (k + K_LIMIT) as u64
    }

    pub fn in_range(j: i32, k: i64) -> bool {
        j.abs() <= J_LIMIT && k.abs() <= K_LIMIT
    }

    /// Coefficient at an index inside the narrow range `|j| <= 62`, `|k| <= 2^52`.
    pub fn coefficient(&self, idx: DyadicIndex) -> Result<f64> {
        if !Self::in_range(idx.j, idx.k) {
            return Err(Error::IndexOverflow(format!("({}, {}) outside |j| <= {J_LIMIT}, |k| <= 2^52", idx.j, idx.k)));
        }
        Ok(self.coefficient_unchecked(idx.j, idx.k))
    }

    #[inline]
    pub fn coefficient_unchecked(&self, j: i32, k: i64) -> f64 {
        if self.zero {
            return 0.0;
        }
        let c = Self::packed(j, k);
        let h1 = mix64(mix64(c ^ self.keys[0]).wrapping_add(self.keys[1]));
        let h2 = mix64(mix64(c ^ self.keys[2]).wrapping_add(self.keys[3]));
        box_muller(h1, h2)
    }

    /// Coefficient at an arbitrary index; indices outside the narrow range are hashed from
    /// their full two's-complement representation under a separate domain tag.
    pub fn coefficient_any(&self, j: i64, k: &BigInt) -> f64 {
        if self.zero {
            return 0.0;
        }
        if let (Ok(jn), Some(kn)) = (i32::try_from(j), k.to_i64()) {
            if Self::in_range(jn, kn) {
                return self.coefficient_unchecked(jn, kn);
            }
        }
        let bytes = k.to_signed_bytes_le();
        let mut h = mix64(self.keys[0] ^ 0x5749_4445_0000_0001 ^ j as u64);
        for chunk in bytes.chunks(8) {
            let mut b = [0u8; 8];
            b[..chunk.len()].copy_from_slice(chunk);
            h = mix64(h ^ u64::from_le_bytes(b)).wrapping_add(self.keys[1]);
        }
        h = mix64(h ^ bytes.len() as u64);
        box_muller(mix64(h ^ self.keys[2]), mix64(h ^ self.keys[3]))
    }

    /// `max |eps_jk| / sqrt(log(2 + |j|) log(2 + |k|))` over a finite range.
    pub fn envelope_constant(&self, js: std::ops::RangeInclusive<i32>, ks: std::ops::RangeInclusive<i64>) -> Result<f64> {
        if js.is_empty() || ks.is_empty() {
            return Err(Error::Insufficient("empty index range".into()));
        }
        let mut best: f64 = 0.0;
        for j in js {
            let lj = (2.0 + j.abs() as f64).ln();
            for k in ks.clone() {
                let e = self.coefficient(DyadicIndex::new(j, k))?.abs();
                best = best.max(e / (lj * (2.0 + k.abs() as f64).ln()).sqrt());
            }
        }
        Ok(best)
    }

    /// `tau_j(s)`: largest `|eps_jk|` over `|s - 2^-j k| <= j 2^(1-j)`.
    pub fn tau_local_max(&self, s: f64, j: i64) -> Result<f64> {
        self.tau_scaled(s, j, 1)
    }

    /// As [`Self::tau_local_max`] with the window half-width multiplied by `factor`.
    pub fn tau_scaled(&self, s: f64, j: i64, factor: i64) -> Result<f64> {
        if j < 1 {
            return Err(Error::OutOfRange(format!("tau needs j >= 1, got {j}")));
        }
        if !s.is_finite() || factor < 1 {
            return Err(Error::OutOfRange(format!("bad position {s} or factor {factor}")));
        }
        let half = BigInt::from(2 * j * factor);
        let (fl, ce) = scaled_floor_ceil(s, j);
        let mut k = ce - &half;
        let hi = fl + &half;
        let mut best: f64 = 0.0;
        while k <= hi {
            best = best.max(self.coefficient_any(j, &k).abs());
            k += 1;
        }
        Ok(best)
    }

    /// Writes `j,k,value` rows for an index box.
    pub fn dump_csv<W: Write>(&self, js: std::ops::RangeInclusive<i32>, ks: std::ops::RangeInclusive<i64>, mut w: W) -> Result<()> {
        writeln!(w, "j,k,value")?;
        for j in js {
            for k in ks.clone() {
                writeln!(w, "{j},{k},{:.17e}", self.coefficient(DyadicIndex::new(j, k))?)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact `floor(2^j s)` and `ceil(2^j s)`.
fn scaled_floor_ceil(s: f64, j: i64) -> (BigInt, BigInt) {
    let (mant, exp, sign) = s.integer_decode();
    let m = BigInt::from(mant) * BigInt::from(sign);
    let e = exp as i64 + j;
    if m.is_zero() {
        return (BigInt::zero(), BigInt::zero());
    }
    if e >= 0 {
        let x = m << (e as usize);
        (x.clone(), x)
    } else {
        let sh = (-e) as usize;
        let fl = &m >> sh;
        let ce = -((-&m) >> sh);
        (fl, ce)
    }
}

/// Bound on `sup_{|y| >= r} |kernel(y, theta)|` used to truncate translate sums.
#[derive(Debug, Clone, PartialEq)]
pub enum TailMajorant {
    /// `c (2 + |y|)^-2`, evaluated one cell inside the neglected range.
    Power2 { c: f64 },
    /// Monotone envelope of tabulated kernels at integer `|y|`, continued by the fitted
    /// `c (2 + |y|)^-2` tail beyond the table.
    Envelope { env: Vec<f64>, tail_coef: f64 },
}

impl TailMajorant {
    pub fn from_tables(tables: &[&KernelTable]) -> Self {
        let y_max = tables.iter().map(|t| t.y_max()).fold(f64::INFINITY, f64::min).floor() as usize;
        let mut env = vec![0.0f64; y_max + 1];
        let mut tail_coef: f64 = 0.0;
        for t in tables {
            let e = t.envelope();
            let per_unit = (1.0 / t.dy).round() as usize;
            for (r, v) in env.iter_mut().enumerate() {
                // one node of slack covers interpolation between nodes
                let node = (r * per_unit).saturating_sub(1);
                *v = v.max(e[node.min(e.len() - 1)]);
            }
            tail_coef = tail_coef.max(t.tail_coefficient());
        }
        TailMajorant::Envelope { env, tail_coef }
    }

    /// Sum of the bound over neglected translates at distances `K + 1, K + 2, ...`.
    pub fn one_sided_tail(&self, k: u64) -> f64 {
        match self {
            TailMajorant::Power2 { c } => c * trigamma(k as f64 + 2.0),
            TailMajorant::Envelope { env, tail_coef } => {
                let last = env.len() as u64 - 1;
                let mut s = 0.0;
                let mut r = k + 1;
                while r <= last {
                    s += env[r as usize];
                    r += 1;
                }
                s + tail_coef * trigamma(2.0 + r as f64)
            }
        }
    }

    /// Sum of the bound at every integer distance `>= 0`; majorizes `sum_k |kernel(y - k)|`.
    pub fn lattice_sum(&self) -> f64 {
        let head = match self {
            TailMajorant::Power2 { c } => *c / 4.0,
            TailMajorant::Envelope { env, .. } => env[0],
        };
        2.0 * (head + self.one_sided_tail(0))
    }
}

/// Translates needed so that the neglected part of `sum_k |kernel(2^j t - k)|` stays below
/// `tail_tol` for every `t` in `t_range`.
pub fn k_window(t_range: (f64, f64), j: i32, tail_tol: f64, majorant: &TailMajorant) -> (i64, i64) {
    assert!(tail_tol > 0.0, "tail tolerance must be positive");
    let (lo, hi) = (t_range.0.min(t_range.1), t_range.0.max(t_range.1));
    let sc = 2f64.powi(j);
    let ok = |k: u64| 2.0 * majorant.one_sided_tail(k) <= tail_tol;
    let mut upper = 1u64;
    while !ok(upper) {
        upper *= 2;
    }
    let mut lower = 0u64;
    if !ok(0) {
        // invariant: !ok(lower), ok(upper)
        while upper - lower > 1 {
            let mid = (lower + upper) / 2;
            if ok(mid) {
                upper = mid;
            } else {
                lower = mid;
            }
        }
    } else {
        upper = 0;
    }
    let kk = upper as i64;
    ((lo * sc).floor() as i64 - kk, (hi * sc).ceil() as i64 + kk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn deterministic() {
        let f = CoefficientField::new(7);
        let a = f.coefficient(DyadicIndex::new(3, -2)).unwrap();
        let b = f.coefficient(DyadicIndex::new(3, -2)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a, CoefficientField::new(8).coefficient(DyadicIndex::new(3, -2)).unwrap());
    }

    #[test]
    fn grid_mean_small() {
        let f = CoefficientField::new(11);
        let mut s = 0.0;
        for j in 0..100 {
            for k in 0..100 {
                s += f.coefficient_unchecked(j, k);
            }
        }
        assert!((s / 1e4).abs() <= 0.02 + 1e-12, "mean {}", s / 1e4);
    }

    #[test]
    fn moments_and_ks() {
        let f = CoefficientField::new(2024);
        let mut xs: Vec<f64> = (0..100_000).map(|i| f.coefficient_unchecked((i % 61) - 30, i as i64 * 7919 - 300_000)).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 4.0 / n.sqrt());
        assert!((var - 1.0).abs() < 0.05);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let normal = Normal::new(0.0, 1.0).unwrap();
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let c = normal.cdf(*x);
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn narrow_bounds_enforced() {
        let f = CoefficientField::new(1);
        assert!(f.coefficient(DyadicIndex::new(63, 0)).is_err());
        assert!(f.coefficient(DyadicIndex::new(0, K_LIMIT + 1)).is_err());
        assert!(f.coefficient(DyadicIndex::new(-62, -K_LIMIT)).is_ok());
    }

    #[test]
    fn wide_path_agrees_inside_narrow_range() {
        let f = CoefficientField::new(5);
        let v = f.coefficient_any(4, &BigInt::from(-9));
        assert_eq!(v, f.coefficient_unchecked(4, -9));
        let w1 = f.coefficient_any(100, &(BigInt::from(1) << 90usize));
        let w2 = f.coefficient_any(100, &((BigInt::from(1) << 90usize) + 1));
        assert!(w1.is_finite() && w2.is_finite() && w1 != w2);
    }

    #[test]
    fn zero_field() {
        let f = CoefficientField::zeros();
        assert_eq!(f.coefficient_unchecked(1, 1), 0.0);
    }

    #[test]
    fn envelope_single_point() {
        let f = CoefficientField::new(3);
        let e = f.envelope_constant(0..=0, 0..=0).unwrap();
        let v = f.coefficient_unchecked(0, 0).abs() / 2f64.ln();
        assert!((e - v).abs() < 1e-15);
        assert!(f.envelope_constant(1..=0, 0..=0).is_err());
        assert_ne!(e, CoefficientField::new(4).envelope_constant(0..=0, 0..=0).unwrap());
    }

    #[test]
    fn envelope_stable_under_doubling() {
        let f = CoefficientField::new(99);
        let a = f.envelope_constant(-20..=20, -(1 << 12)..=(1 << 12)).unwrap();
        let b = f.envelope_constant(-40..=40, -(1 << 13)..=(1 << 13)).unwrap();
        assert!(a.is_finite() && b >= a && b <= 1.25 * a, "{a} {b}");
    }

    #[test]
    fn tau_window() {
        let f = CoefficientField::new(21);
        let direct = (-2..=2).map(|k| f.coefficient_unchecked(1, k).abs()).fold(0.0, f64::max);
        assert_eq!(f.tau_local_max(0.0, 1).unwrap(), direct);
        assert!(f.tau_local_max(0.3, 0).is_err());
        for j in 1..30 {
            assert!(f.tau_scaled(0.3, j, 2).unwrap() >= f.tau_local_max(0.3, j).unwrap());
        }
    }

    #[test]
    fn scaled_floor_ceil_exact() {
        assert_eq!(scaled_floor_ceil(0.3, 1), (BigInt::from(0), BigInt::from(1)));
        assert_eq!(scaled_floor_ceil(-0.3, 2), (BigInt::from(-2), BigInt::from(-1)));
        assert_eq!(scaled_floor_ceil(0.75, 2), (BigInt::from(3), BigInt::from(3)));
        // the double nearest 0.3 has an odd 53-bit mantissa and exponent -54
        let (f, c) = scaled_floor_ceil(0.3, 50);
        assert_eq!(&c - &f, BigInt::from(1));
        let (f, c) = scaled_floor_ceil(0.3, 100);
        assert_eq!(f, c);
    }

    #[test]
    fn power2_window_example() {
        let c = 1.7;
        let maj = TailMajorant::Power2 { c };
        let (lo, hi) = k_window((0.0, 1.0), 0, 1e-3, &maj);
        let kk = -lo;
        assert_eq!(hi, kk + 1);
        let bound: f64 = 2.0 * (kk + 1..2_000_000).map(|k| c / (2.0 + k as f64 - 1.0).powi(2)).sum::<f64>();
        assert!(bound <= 1e-3 * 1.001, "bound {bound}");
        let (lo2, hi2) = k_window((0.0, 1.0), 0, 5e-4, &maj);
        assert!(lo2 <= lo && hi2 >= hi);
    }

    #[test]
    fn window_scales_with_level() {
        let maj = TailMajorant::Power2 { c: 1.0 };
        let (a, b) = k_window((0.0, 1.0), 10, 1e-2, &maj);
        let (c, d) = k_window((0.0, 1.0), 0, 1e-2, &maj);
        assert_eq!((b - a) - (d - c), 1023);
    }
}
