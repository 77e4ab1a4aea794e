use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hoelder::HProfile;
use crate::lattice::{k_window, CoefficientField, DyadicIndex, TailMajorant, J_LIMIT, K_LIMIT};
use crate::trajectory::{ProcessKind, TrajectoryGrid, TrajectoryMeta};
use crate::wavelet::{lagrange4, KernelBank, KernelTable, BANK_MAX_DTHETA, RING_HI};

/// Truncation and domain of the wavelet series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    pub j_min: i32,
    pub j_max: i32,
    /// Bound on the neglected translates of each level, relative to the coefficient size.
    pub tail_tol: f64,
    pub theta_bounds: (f64, f64),
    /// Largest `|t|` the engine evaluates at.
    pub t_bound: f64,
    pub seed: u64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig { j_min: -16, j_max: 14, tail_tol: 1e-6, theta_bounds: (0.1, 0.9), t_bound: 2.0, seed: 0 }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.theta_bounds;
        if !(0.0 < a && a < b && b < 1.0) {
            return Err(Error::OutOfRange(format!("theta bounds ({a}, {b}) must satisfy 0 < a < b < 1")));
        }
        if self.j_min > 0 || self.j_max < 1 || self.j_min < -J_LIMIT || self.j_max > J_LIMIT {
            return Err(Error::OutOfRange(format!("levels {}..={} need j_min <= 0 < j_max", self.j_min, self.j_max)));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::OutOfRange(format!("tail_tol = {}", self.tail_tol)));
        }
        if !(self.t_bound > 0.0) || self.t_bound * 2f64.powi(self.j_max) > (K_LIMIT / 2) as f64 {
            return Err(Error::OutOfRange(format!("t_bound = {}", self.t_bound)));
        }
        Ok(())
    }
}

/// Parts of the decomposition `B = B1 + B2 - R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    B1,
    B2,
    R,
}

/// Reported bound on the series error of one value, split by source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationBound {
    /// Levels below `j_min`.
    pub coarse: f64,
    /// Levels above `j_max`, for `B2` and `R` together.
    pub fine: f64,
    /// Translates outside the k-windows.
    pub window: f64,
    pub total: f64,
    /// Standard deviation bound of the neglected levels, which are centred Gaussian.
    pub rms: f64,
}

/// Kernel values at y-node `iy` for derivative order `p`.
trait Columns: Sync {
    fn at(&self, p: usize, iy: usize) -> f64;
}

/// Columns collapsed at a fixed theta.
struct FixedTheta {
    cols: Vec<Vec<f64>>,
}

impl Columns for FixedTheta {
    #[inline(always)]
    fn at(&self, p: usize, iy: usize) -> f64 {
        self.cols[p][iy]
    }
}

struct VaryingTheta<'a> {
    tables: &'a [KernelTable],
    nt: usize,
    it0: usize,
    wt: [f64; 4],
}

impl Columns for VaryingTheta<'_> {
    #[inline(always)]
    fn at(&self, p: usize, iy: usize) -> f64 {
        let row = &self.tables[p].values[iy * self.nt + self.it0..iy * self.nt + self.it0 + 4];
        row[0] * self.wt[0] + row[1] * self.wt[1] + row[2] * self.wt[2] + row[3] * self.wt[3]
    }
}

struct LevelRow {
    k0: i64,
    eps: Vec<f64>,
}

/// Sums over levels for derivative orders `0..np`.
#[derive(Debug, Clone, Copy, Default)]
struct Parts {
    b1: [f64; 3],
    b2: [f64; 3],
    r: [f64; 3],
}

/// Evaluator of the random wavelet series for one seed.
pub struct FieldEngine {
    bank: Arc<KernelBank>,
    config: FieldConfig,
    lattice: CoefficientField,
    /// Half-width of the k-window for derivative orders 0, 1, 2.
    half_window: [i64; BANK_MAX_DTHETA + 1],
    per_unit: i64,
    levels: Vec<LevelRow>,
    envelope: f64,
    lattice_sums: [f64; BANK_MAX_DTHETA + 1],
    /// Majorants of `sum_k K_p(y - k)^2`.
    square_sums: [f64; BANK_MAX_DTHETA + 1],
    /// The same two majorants for the y-slope of each kernel.
    slope_sums: [f64; BANK_MAX_DTHETA + 1],
    slope_square_sums: [f64; BANK_MAX_DTHETA + 1],
}

/// `sup |dK/dy|` over `|y| >= r - 1` at integer `r`, by central differences on the nodes.
fn slope_envelope(t: &KernelTable) -> Vec<f64> {
    let per_unit = (1.0 / t.dy).round() as usize;
    let mut env = vec![0.0f64; t.ny_half / per_unit + 1];
    for iy in 1..t.ny() - 1 {
        let r = (iy as isize - t.ny_half as isize).unsigned_abs() / per_unit;
        let m = (0..t.theta.count).fold(0.0f64, |a, it| a.max((t.value(iy + 1, it) - t.value(iy - 1, it)).abs()));
        env[r] = env[r].max(m / (2.0 * t.dy));
    }
    for r in (0..env.len() - 1).rev() {
        env[r] = env[r].max(env[r + 1]);
    }
    env
}

impl FieldEngine {
    pub fn new(bank: Arc<KernelBank>, config: FieldConfig) -> Result<Self> {
        let lattice = CoefficientField::new(config.seed);
        Self::with_coefficients(bank, config, lattice)
    }

    /// Engine over a given coefficient field, e.g. [`CoefficientField::zeros`].
    pub fn with_coefficients(bank: Arc<KernelBank>, config: FieldConfig, lattice: CoefficientField) -> Result<Self> {
        config.validate()?;
        let t0 = &bank.synthesis[0];
        for th in [config.theta_bounds.0, config.theta_bounds.1] {
            t0.check_theta(th)?;
        }
        let per_unit_f = 1.0 / t0.dy;
        let per_unit = per_unit_f.round() as i64;
        if (per_unit_f - per_unit as f64).abs() > 1e-9 * per_unit_f {
            return Err(Error::GridTooCoarse(format!("kernel step {} is not the reciprocal of an integer", t0.dy)));
        }
        let mut half_window = [0i64; BANK_MAX_DTHETA + 1];
        let mut lattice_sums = [0.0; BANK_MAX_DTHETA + 1];
        let mut square_sums = [0.0; BANK_MAX_DTHETA + 1];
        let mut slope_sums = [0.0; BANK_MAX_DTHETA + 1];
        let mut slope_square_sums = [0.0; BANK_MAX_DTHETA + 1];
        for n in 0..=BANK_MAX_DTHETA {
            let tabs: Vec<&KernelTable> = bank.synthesis[..=n].iter().collect();
            let (lo, _) = k_window((0.0, 0.0), 0, config.tail_tol, &TailMajorant::from_tables(&tabs));
            half_window[n] = -lo;
            let own = TailMajorant::from_tables(&[&bank.synthesis[n]]);
            lattice_sums[n] = own.lattice_sum();
            if let TailMajorant::Envelope { env, tail_coef } = &own {
                let far = tail_coef * tail_coef * crate::special::polygamma(3, 2.0 + env.len() as f64) / 6.0;
                square_sums[n] = 2.0 * (env.iter().map(|v| v * v).sum::<f64>() + far);
            }
            let slope = slope_envelope(&bank.synthesis[n]);
            slope_sums[n] = 2.0 * slope.iter().sum::<f64>();
            slope_square_sums[n] = 2.0 * slope.iter().map(|v| v * v).sum::<f64>();
        }
        let kmax = half_window[BANK_MAX_DTHETA];
        if (kmax + 3) as f64 >= t0.y_max() {
            return Err(Error::GridTooCoarse(format!(
                "k-window half-width {kmax} does not fit the tabulated range {}",
                t0.y_max()
            )));
        }
        let levels: Vec<LevelRow> = (config.j_min..=config.j_max)
            .into_par_iter()
            .map(|j| {
                let sc = 2f64.powi(j) * config.t_bound;
                let k0 = (-sc).floor() as i64 - kmax - 2;
                let k1 = sc.ceil() as i64 + kmax + 2;
                LevelRow { k0, eps: (k0..=k1).map(|k| lattice.coefficient_unchecked(j, k)).collect() }
            })
            .collect();
        let mut envelope: f64 = 0.0;
        for (row, j) in levels.iter().zip(config.j_min..) {
            let lj = (2.0 + j.abs() as f64).ln();
            for (i, e) in row.eps.iter().enumerate() {
                let k = row.k0 + i as i64;
                envelope = envelope.max(e.abs() / (lj * (2.0 + k.abs() as f64).ln()).sqrt());
            }
        }
        Ok(FieldEngine { bank, config, lattice, half_window, per_unit, levels, envelope, lattice_sums, square_sums, slope_sums, slope_square_sums })
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn bank(&self) -> &Arc<KernelBank> {
        &self.bank
    }

    pub fn lattice(&self) -> &CoefficientField {
        &self.lattice
    }

    /// Translates kept on each side of `2^j t` for derivative order `n`.
    pub fn half_window(&self, n: usize) -> Result<i64> {
        self.check_order(n)?;
        Ok(self.half_window[n])
    }

    /// Empirical envelope constant of the cached coefficients.
    pub fn envelope_constant(&self) -> f64 {
        self.envelope
    }

    fn check_order(&self, n: usize) -> Result<()> {
        if n > BANK_MAX_DTHETA {
            return Err(Error::UnsupportedOrder(format!("theta-derivative order {n} > {BANK_MAX_DTHETA}")));
        }
        Ok(())
    }

    fn check_theta(&self, theta: f64) -> Result<()> {
        let (a, b) = self.config.theta_bounds;
        if !(theta >= a && theta <= b) {
            return Err(Error::OutOfRange(format!("theta = {theta} outside [{a}, {b}]")));
        }
        Ok(())
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if !(t.abs() <= self.config.t_bound) {
            return Err(Error::OutOfRange(format!("|t| = {} exceeds t_bound {}", t.abs(), self.config.t_bound)));
        }
        Ok(())
    }

    fn fixed(&self, theta: f64, np: usize) -> FixedTheta {
        let tab = &self.bank.synthesis[0];
        let (it0, wt) = tab.theta_stencil(theta);
        let cols = self.bank.synthesis[..np]
            .iter()
            .map(|t| (0..t.ny()).map(|iy| (0..4).map(|b| wt[b] * t.value(iy, it0 + b)).sum()).collect())
            .collect();
        FixedTheta { cols }
    }

    fn varying(&self, theta: f64) -> VaryingTheta<'_> {
        let tab = &self.bank.synthesis[0];
        let (it0, wt) = tab.theta_stencil(theta);
        VaryingTheta { tables: &self.bank.synthesis, nt: tab.theta.count, it0, wt }
    }

    /// `sum_{k = ka..=kb} eps_jk K_p(x - k)` for `p < np`.
    #[inline]
    fn level_sums<C: Columns>(&self, cols: &C, np: usize, j: i32, x: f64, ka: i64, kb: i64) -> [f64; 3] {
        let row = &self.levels[(j - self.config.j_min) as usize];
        let ny_half = self.bank.synthesis[0].ny_half as f64;
        let u0 = x * self.per_unit as f64 + ny_half;
        let fl = u0.floor();
        let wy = lagrange4(u0 - fl + 1.0);
        let base = fl as i64 - 1;
        let mut acc = [0.0; 3];
        for k in ka..=kb {
            let e = row.eps[(k - row.k0) as usize];
            let iy0 = (base - self.per_unit * k) as usize;
            for (p, a) in acc.iter_mut().enumerate().take(np) {
                let v = wy[0] * cols.at(p, iy0)
                    + wy[1] * cols.at(p, iy0 + 1)
                    + wy[2] * cols.at(p, iy0 + 2)
                    + wy[3] * cols.at(p, iy0 + 3);
                *a += e * v;
            }
        }
        acc
    }

    /// `d^q/dtheta^q [2^(-j theta) S]` for `q < np` from `d^p S`.
    #[inline]
    fn leibniz(np: usize, j: i32, theta: f64, s: &[f64; 3], out: &mut [f64; 3]) {
        let w = (-(j as f64) * theta * std::f64::consts::LN_2).exp();
        let l = -(j as f64) * std::f64::consts::LN_2;
        out[0] += w * s[0];
        if np > 1 {
            out[1] += w * (s[1] + l * s[0]);
        }
        if np > 2 {
            out[2] += w * (s[2] + 2.0 * l * s[1] + l * l * s[0]);
        }
    }

    fn parts<C: Columns>(&self, cols: &C, np: usize, t: f64, theta: f64, want: [bool; 3]) -> Parts {
        let kk = self.half_window[np - 1];
        let mut out = Parts::default();
        if want[0] {
            for j in self.config.j_min..=0 {
                let x = t * 2f64.powi(j);
                let ka = x.floor().min(0.0) as i64 - kk;
                let kb = x.ceil().max(0.0) as i64 + kk;
                let sx = self.level_sums(cols, np, j, x, ka, kb);
                let s0 = self.level_sums(cols, np, j, 0.0, ka, kb);
                let d = [sx[0] - s0[0], sx[1] - s0[1], sx[2] - s0[2]];
                Self::leibniz(np, j, theta, &d, &mut out.b1);
            }
        }
        for j in 1..=self.config.j_max {
            if want[1] {
                let x = t * 2f64.powi(j);
                let s = self.level_sums(cols, np, j, x, x.floor() as i64 - kk, x.ceil() as i64 + kk);
                Self::leibniz(np, j, theta, &s, &mut out.b2);
            }
            if want[2] {
                let s = self.level_sums(cols, np, j, 0.0, -kk, kk);
                Self::leibniz(np, j, theta, &s, &mut out.r);
            }
        }
        out
    }

    fn check_point(&self, t: f64, theta: f64, n: usize) -> Result<()> {
        self.check_order(n)?;
        self.check_theta(theta)?;
        self.check_t(t)
    }

    /// `S_j(y, theta) = sum_k eps_jk d^m/dy^m d^n/dtheta^n Psi(y - k, theta)` over the k-window
    /// around `y`. Only `m = 0` is tabulated.
    pub fn eval_sj(&self, j: i32, y: f64, theta: f64, m: usize, n: usize) -> Result<f64> {
        if m != 0 {
            return Err(Error::UnsupportedOrder(format!("y-derivative order {m} is not tabulated")));
        }
        self.check_order(n)?;
        self.check_theta(theta)?;
        if !y.is_finite() {
            return Err(Error::OutOfRange(format!("y = {y}")));
        }
        let kk = self.half_window[n];
        let (ka, kb) = (y.floor() as i64 - kk, y.ceil() as i64 + kk);
        let cached = (self.config.j_min..=self.config.j_max).contains(&j) && {
            let row = &self.levels[(j - self.config.j_min) as usize];
            ka >= row.k0 && kb < row.k0 + row.eps.len() as i64
        };
        if cached {
            let tab = &self.bank.synthesis[0];
            let (it0, wt) = tab.theta_stencil(theta);
            let cols = VaryingTheta { tables: &self.bank.synthesis[n..=n], nt: tab.theta.count, it0, wt };
            return Ok(self.level_sums(&cols, 1, j, y, ka, kb)[0]);
        }
        let table = &self.bank.synthesis[n];
        let mut acc = 0.0;
        for k in ka..=kb {
            acc += self.lattice.coefficient(DyadicIndex::new(j, k))? * table.eval_unchecked(y - k as f64, theta);
        }
        Ok(acc)
    }

    /// One part of the decomposition, differentiated `n` times in theta.
    pub fn eval_component(&self, part: Component, t: f64, theta: f64, n: usize) -> Result<f64> {
        self.check_point(t, theta, n)?;
        let want = [part == Component::B1, part == Component::B2, part == Component::R];
        let p = self.parts(&self.varying(theta), n + 1, t, theta, want);
        Ok(match part {
            Component::B1 => p.b1[n],
            Component::B2 => p.b2[n],
            Component::R => p.r[n],
        })
    }

    /// `d^n/dtheta^n B(t, theta)`.
    pub fn eval_field(&self, t: f64, theta: f64, n: usize) -> Result<f64> {
        self.check_point(t, theta, n)?;
        let p = self.parts(&self.varying(theta), n + 1, t, theta, [true; 3]);
        Ok(p.b1[n] + p.b2[n] - p.r[n])
    }

    fn profile_theta(&self, h: &HProfile, t: f64) -> Result<f64> {
        let theta = h.eval(t);
        self.check_theta(theta).map_err(|_| {
            Error::OutOfRange(format!("H({t}) = {theta} escapes theta bounds {:?}", self.config.theta_bounds))
        })?;
        Ok(theta)
    }

    /// The mBm `X(t) = B(t, H(t))`.
    pub fn eval_mbm(&self, h: &HProfile, t: f64) -> Result<f64> {
        self.check_t(t)?;
        let theta = self.profile_theta(h, t)?;
        self.eval_field(t, theta, 0)
    }

    /// `Y(s) = d/dtheta B(s, H(s))`.
    pub fn eval_y(&self, h: &HProfile, s: f64) -> Result<f64> {
        self.check_t(s)?;
        let theta = self.profile_theta(h, s)?;
        self.eval_field(s, theta, 1)
    }

    fn grid_times(&self, t0: f64, step: f64, len: usize) -> Result<Vec<f64>> {
        if !(step > 0.0) || len < 2 {
            return Err(Error::OutOfRange("grid needs a positive step and two points".into()));
        }
        let ts: Vec<f64> = (0..len).map(|i| t0 + i as f64 * step).collect();
        self.check_t(ts[0])?;
        self.check_t(ts[len - 1])?;
        Ok(ts)
    }

    fn meta(&self, kind: ProcessKind, h: Option<&HProfile>, thetas: (f64, f64), n: usize) -> TrajectoryMeta {
        TrajectoryMeta {
            kind,
            seed: Some(self.config.seed),
            h_profile: h.cloned(),
            truncation_bound: self.truncation_bound_for(thetas, n).ok().map(|b| b.total),
            config: serde_json::to_value(self.config).ok(),
        }
    }

    /// `d^n/dtheta^n B(., theta)` on a grid; `n = 0` is an fBm path.
    pub fn field_trajectory(&self, theta: f64, n: usize, t0: f64, step: f64, len: usize) -> Result<TrajectoryGrid<f64>> {
        self.check_order(n)?;
        self.check_theta(theta)?;
        let ts = self.grid_times(t0, step, len)?;
        let cols = self.fixed(theta, n + 1);
        let r = self.parts(&cols, n + 1, 0.0, theta, [false, false, true]).r[n];
        let values: Vec<f64> = ts
            .par_iter()
            .map(|&t| {
                let p = self.parts(&cols, n + 1, t, theta, [true, true, false]);
                p.b1[n] + p.b2[n] - r
            })
            .collect();
        TrajectoryGrid::new(t0, step, values, self.meta(ProcessKind::Field { theta, n }, None, (theta, theta), n))
    }

    /// One decomposition part on a grid at fixed theta.
    pub fn component_trajectory(
        &self,
        part: Component,
        theta: f64,
        n: usize,
        t0: f64,
        step: f64,
        len: usize,
    ) -> Result<TrajectoryGrid<f64>> {
        self.check_order(n)?;
        self.check_theta(theta)?;
        let ts = self.grid_times(t0, step, len)?;
        let cols = self.fixed(theta, n + 1);
        let want = [part == Component::B1, part == Component::B2, part == Component::R];
        let values: Vec<f64> = ts
            .par_iter()
            .map(|&t| {
                let p = self.parts(&cols, n + 1, t, theta, want);
                match part {
                    Component::B1 => p.b1[n],
                    Component::B2 => p.b2[n],
                    Component::R => p.r[n],
                }
            })
            .collect();
        TrajectoryGrid::new(t0, step, values, self.meta(ProcessKind::Field { theta, n }, None, (theta, theta), n))
    }

    /// `X` and `Y` on a common grid from the same series.
    pub fn mbm_trajectories(
        &self,
        h: &HProfile,
        t0: f64,
        step: f64,
        len: usize,
    ) -> Result<(TrajectoryGrid<f64>, TrajectoryGrid<f64>)> {
        let ts = self.grid_times(t0, step, len)?;
        let thetas = ts.iter().map(|&t| self.profile_theta(h, t)).collect::<Result<Vec<_>>>()?;
        let pairs: Vec<(f64, f64)> = ts
            .par_iter()
            .zip(thetas.par_iter())
            .map(|(&t, &theta)| {
                let p = self.parts(&self.varying(theta), 2, t, theta, [true; 3]);
                (p.b1[0] + p.b2[0] - p.r[0], p.b1[1] + p.b2[1] - p.r[1])
            })
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let range = thetas.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let x = TrajectoryGrid::new(t0, step, xs, self.meta(ProcessKind::Mbm, Some(h), range, 0))?;
        let y = TrajectoryGrid::new(t0, step, ys, self.meta(ProcessKind::Y, Some(h), range, 1))?;
        Ok((x, y))
    }

    /// Bound on the series error of `d^n/dtheta^n B(t, theta)` over `|t| <= t_bound` and the
    /// configured theta bounds.
    pub fn truncation_bound(&self, n: usize) -> Result<TruncationBound> {
        self.truncation_bound_for(self.config.theta_bounds, n)
    }

    /// As [`Self::truncation_bound`] for theta restricted to `[a, b]`. Neglected coefficients
    /// are bounded by the cached envelope constant; within the k-windows of coarse levels the
    /// kernel slope is bounded by the Bernstein factor `8 pi / 3`.
    pub fn truncation_bound_for(&self, (a, b): (f64, f64), n: usize) -> Result<TruncationBound> {
        self.check_order(n)?;
        self.check_theta(a)?;
        self.check_theta(b)?;
        let m = self.config.t_bound;
        let c = self.envelope;
        let kk = self.half_window[n] as f64;
        let ln2 = std::f64::consts::LN_2;
        let binom = |q: usize| crate::special::binomial(n as u32, q as u32);
        // sum_l C(n, l) (|j| ln 2)^l Lambda_{n-l}, with Lambda a lattice sum of |K| or K^2
        let leib = |j: i32, sums: &[f64; BANK_MAX_DTHETA + 1], root: bool| -> f64 {
            let l = j.abs() as f64 * ln2;
            let v: f64 = (0..=n)
                .map(|q| binom(q) * l.powi(q as i32) * if root { sums[n - q].sqrt() } else { sums[n - q] })
                .sum();
            if root {
                v * v
            } else {
                v
            }
        };
        let growth = |j: i32, x: f64| ((2.0 + j.abs() as f64).ln() * (2.0 + x + kk).ln()).sqrt();
        let (mut fine, mut fine_var) = (0.0, 0.0);
        for j in self.config.j_max + 1..self.config.j_max + 400 {
            let w = 2f64.powf(-(j as f64) * a);
            let term = 2.0 * c * growth(j, 2f64.powi(j) * m) * w * leib(j, &self.lattice_sums, false);
            fine += term;
            fine_var += 4.0 * w * w * leib(j, &self.square_sums, true);
            if term < 1e-17 * fine {
                break;
            }
        }
        let (mut coarse, mut coarse_var) = (0.0, 0.0);
        for j in (self.config.j_min - 4000..self.config.j_min).rev() {
            let x = 2f64.powi(j) * m;
            let w = 2f64.powf(-(j as f64) * b) * x;
            let term = c * growth(j, x) * w * leib(j, &self.slope_sums, false);
            coarse += term;
            coarse_var += w * w * leib(j, &self.slope_square_sums, true);
            if term < 1e-17 * coarse {
                break;
            }
        }
        let mut window = 0.0;
        for j in self.config.j_min..=self.config.j_max {
            let x = 2f64.powi(j) * m;
            let theta = if j <= 0 { b } else { a };
            let l = j.abs() as f64 * ln2;
            let lf: f64 = (0..=n).map(|q| binom(q) * l.powi(q as i32)).sum();
            let shrink = if j <= 0 { (x * RING_HI).min(2.0) } else { 2.0 };
            window += c * growth(j, x + kk) * 2f64.powf(-(j as f64) * theta) * lf * shrink * self.config.tail_tol;
        }
        Ok(TruncationBound {
            coarse,
            fine,
            window,
            total: coarse + fine + window,
            rms: (fine_var + coarse_var).sqrt() + window,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::test_bank;
    use crate::wavelet::SynthesisConfig;

    fn engine(seed: u64) -> FieldEngine {
        FieldEngine::new(test_bank(), FieldConfig { seed, ..FieldConfig::default() }).unwrap()
    }

    #[test]
    fn zero_coefficients_give_zero() {
        let e = FieldEngine::with_coefficients(test_bank(), FieldConfig::default(), CoefficientField::zeros()).unwrap();
        for n in 0..3 {
            assert_eq!(e.eval_field(0.8, 0.4, n).unwrap(), 0.0);
        }
        let tr = e.field_trajectory(0.4, 0, 0.0, 0.25, 5).unwrap();
        assert!(tr.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vanishes_at_origin() {
        let e = engine(3);
        for n in 0..3 {
            assert!(e.eval_field(0.0, 0.55, n).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn remainder_does_not_depend_on_t() {
        let e = engine(4);
        let a = e.eval_component(Component::R, 0.3, 0.45, 1).unwrap();
        let b = e.eval_component(Component::R, -1.7, 0.45, 1).unwrap();
        assert_eq!(a, b);
        let sum: f64 = [Component::B1, Component::B2].iter().map(|&c| e.eval_component(c, 0.9, 0.45, 0).unwrap()).sum::<f64>()
            - e.eval_component(Component::R, 0.9, 0.45, 0).unwrap();
        assert!((sum - e.eval_field(0.9, 0.45, 0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn theta_derivatives_match_differences() {
        let e = engine(5);
        let h = 1e-4;
        for n in 0..2 {
            for &(t, th) in &[(0.7, 0.35), (1.6, 0.62)] {
                let fd = (e.eval_field(t, th + h, n).unwrap() - e.eval_field(t, th - h, n).unwrap()) / (2.0 * h);
                let d = e.eval_field(t, th, n + 1).unwrap();
                assert!((fd - d).abs() <= 1e-4 * d.abs().max(1.0), "n {n} t {t}: {fd} vs {d}");
            }
        }
    }

    #[test]
    fn level_sum_matches_wider_window() {
        let e = engine(6);
        for n in 0..3 {
            let (j, y, th) = (2, 3.37f64, 0.41);
            let kk = 2 * e.half_window(n).unwrap();
            let tab = e.bank().table(n).unwrap();
            let wide: f64 = (y.floor() as i64 - kk..=y.ceil() as i64 + kk)
                .map(|k| e.lattice().coefficient_unchecked(j, k) * tab.eval_unchecked(y - k as f64, th))
                .sum();
            let v = e.eval_sj(j, y, th, 0, n).unwrap();
            assert!((v - wide).abs() < 1e-4, "n {n}: {v} vs {wide}");
            // outside the cached rows the direct sum is used
            let far = e.eval_sj(40, y, th, 0, n).unwrap();
            assert!(far.is_finite());
        }
        assert!(matches!(e.eval_sj(1, 0.0, 0.5, 1, 0), Err(Error::UnsupportedOrder(_))));
    }

    #[test]
    fn finer_levels_stay_within_bound() {
        let cfg = FieldConfig { seed: 7, ..FieldConfig::default() };
        let a = FieldEngine::new(test_bank(), cfg).unwrap();
        let b = FieldEngine::new(test_bank(), FieldConfig { j_max: cfg.j_max + 4, ..cfg }).unwrap();
        let bound = a.truncation_bound_for((0.4, 0.4), 0).unwrap();
        for &t in &[0.3, 1.1, 1.9] {
            let d = (a.eval_field(t, 0.4, 0).unwrap() - b.eval_field(t, 0.4, 0).unwrap()).abs();
            assert!(d <= bound.fine, "{d} > {}", bound.fine);
        }
        assert!(bound.rms <= bound.total);
    }

    #[test]
    fn constant_profile_is_fbm() {
        let e = engine(8);
        let h = HProfile::Constant { value: 0.3 };
        assert_eq!(e.eval_mbm(&h, 1.2).unwrap(), e.eval_field(1.2, 0.3, 0).unwrap());
        assert_eq!(e.eval_y(&h, 1.2).unwrap(), e.eval_field(1.2, 0.3, 1).unwrap());
        // the joint path sums over the wider k-window of the first derivative
        let (x, y) = e.mbm_trajectories(&h, 1.0, 0.125, 3).unwrap();
        assert!((x.values[2] - e.eval_field(1.25, 0.3, 0).unwrap()).abs() < 1e-5);
        assert!((y.values[1] - e.eval_field(1.125, 0.3, 1).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn trajectory_matches_points() {
        let e = engine(9);
        let tr = e.field_trajectory(0.6, 1, -0.5, 0.3, 6).unwrap();
        for i in 0..tr.len() {
            assert!((tr.values[i] - e.eval_field(tr.t(i), 0.6, 1).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn domain_errors() {
        let e = engine(10);
        let escaping = HProfile::Constant { value: 0.95 };
        assert!(matches!(e.eval_mbm(&escaping, 1.0), Err(Error::OutOfRange(_))));
        assert!(e.eval_field(2.5, 0.5, 0).is_err());
        assert!(matches!(e.eval_field(1.0, 0.5, 3), Err(Error::UnsupportedOrder(_))));
        let coarse = Arc::new(KernelBank::build(SynthesisConfig::coarse()).unwrap());
        assert!(matches!(FieldEngine::new(coarse, FieldConfig::default()), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn seeds_are_reproducible() {
        assert_eq!(engine(11).eval_field(0.77, 0.5, 0).unwrap(), engine(11).eval_field(0.77, 0.5, 0).unwrap());
        assert_ne!(engine(11).eval_field(0.77, 0.5, 0).unwrap(), engine(12).eval_field(0.77, 0.5, 0).unwrap());
    }
}
