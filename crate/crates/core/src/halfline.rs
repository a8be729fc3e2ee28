//! Solutions of the half-line eigenvalue equation and subordinacy detection.
//!
//! Solutions obey `a_n u_{n+1} = (E - b_n) u_n - a_{n-1} u_{n-1}` with `a_0 = 1`, seeded by
//! the boundary condition `u_0 cos(theta) + u_1 sin(theta) = 0`, i.e.
//! `(u_0, u_1) = (-sin(theta), cos(theta))`.
//!
//! Values are stored as mantissas with a per-entry rescale level; the true value of entry
//! `n` is `mantissa[n] * 1e100^level[n]`.

use std::f64::consts::{LN_10, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::HalfLineOperator;

pub const RESCALE_AT: f64 = 1e100;
const LN_RESCALE: f64 = 100.0 * LN_10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    theta: f64,
}

impl BoundaryCondition {
    /// Reduces `theta` into `[0, pi)`.
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(PI);
        if t >= PI {
            t = 0.0;
        }
        BoundaryCondition { theta: t }
    }

    pub fn dirichlet() -> Self {
        Self::new(0.0)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `(u_0, u_1)` with `s = 1`.
    pub fn seed(&self) -> (f64, f64) {
        (-self.theta.sin(), self.theta.cos())
    }

    pub fn perpendicular(&self) -> Self {
        Self::new(self.theta + PI / 2.0)
    }

    /// The condition satisfied by a seed `(u_0, u_1)`.
    pub fn from_seed(u0: f64, u1: f64) -> Self {
        Self::new((-u0).atan2(u1))
    }
}

#[derive(Clone, Debug)]
pub struct HalfLineSolution {
    pub energy: f64,
    pub seed: (f64, f64),
    mantissa: Vec<f64>,
    level: Vec<u32>,
}

impl HalfLineSolution {
    /// Index of the last computed entry.
    pub fn len(&self) -> usize {
        self.mantissa.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn boundary(&self) -> BoundaryCondition {
        BoundaryCondition::from_seed(self.seed.0, self.seed.1)
    }

    pub fn mantissa(&self, n: usize) -> f64 {
        self.mantissa[n]
    }

    pub fn level(&self, n: usize) -> u32 {
        self.level[n]
    }

    /// `u_n`; may overflow to infinity when the solution grows past the double range.
    pub fn value(&self, n: usize) -> f64 {
        let l = self.level[n];
        if l == 0 {
            self.mantissa[n]
        } else {
            self.mantissa[n] * (l as f64 * LN_RESCALE).exp()
        }
    }

    /// Solution given by plain values `u_0, u_1, ...` (no rescaling levels).
    pub fn from_values(energy: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 2, "need u_0 and u_1");
        let level = vec![0; values.len()];
        HalfLineSolution {
            energy,
            seed: (values[0], values[1]),
            mantissa: values,
            level,
        }
    }

    /// The same solution multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        HalfLineSolution {
            energy: self.energy,
            seed: (self.seed.0 * factor, self.seed.1 * factor),
            mantissa: self.mantissa.iter().map(|m| m * factor).collect(),
            level: self.level.clone(),
        }
    }

    /// `ln |u_n|`.
    pub fn ln_abs(&self, n: usize) -> f64 {
        self.mantissa[n].abs().ln() + self.level[n] as f64 * LN_RESCALE
    }

    /// `u_i` for `i` in `lo..=hi`, expressed relative to the scale of `u_hi`. The returned
    /// factor `ln_scale` satisfies `u_i = out[i - lo] * exp(ln_scale)`.
    pub fn window(&self, lo: usize, hi: usize) -> (Vec<f64>, f64) {
        let top = self.level[hi];
        let out = (lo..=hi)
            .map(|i| {
                let d = top - self.level[i];
                self.mantissa[i] * (-(d as f64) * LN_RESCALE).exp()
            })
            .collect();
        (out, top as f64 * LN_RESCALE)
    }

    /// `ln sum_{n=1}^{m} |u_n|^2` for every `m` in `0..=len` (entry 0 is `-inf`).
    pub fn ln_cumulative(&self) -> Vec<f64> {
        ln_cumulative(&self.mantissa, &self.level)
    }
}

fn ln_cumulative(mantissa: &[f64], level: &[u32]) -> Vec<f64> {
    let mut out = Vec::with_capacity(mantissa.len());
    out.push(f64::NEG_INFINITY);
    let mut sum = 0.0f64;
    let mut cur = level.get(1).copied().unwrap_or(0);
    for n in 1..mantissa.len() {
        while level[n] > cur {
            sum *= 1e-200;
            cur += 1;
        }
        let m = mantissa[n] * (-((cur - level[n]) as f64) * LN_RESCALE).exp();
        sum += m * m;
        out.push(if sum > 0.0 {
            sum.ln() + 2.0 * cur as f64 * LN_RESCALE
        } else {
            f64::NEG_INFINITY
        });
    }
    out
}

fn ln_add(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// Iterates from an arbitrary seed `(u_0, u_1)` up to index `length`.
pub fn iterate_from_seed(
    op: &HalfLineOperator,
    energy: f64,
    seed: (f64, f64),
    length: usize,
) -> HalfLineSolution {
    let length = length.max(1);
    let mut mantissa = Vec::with_capacity(length + 1);
    let mut level = Vec::with_capacity(length + 1);
    mantissa.push(seed.0);
    mantissa.push(seed.1);
    level.push(0);
    level.push(0);
    let mut cur = 0u32;
    let mut a_prev = 1.0;
    for n in 1..length {
        let a_n = op.a(n);
        let next = ((energy - op.b(n)) * mantissa[n] - a_prev * mantissa[n - 1]) / a_n;
        mantissa.push(next);
        level.push(cur);
        if next.abs() > RESCALE_AT || mantissa[n].abs() > RESCALE_AT {
            cur += 1;
            mantissa[n] /= RESCALE_AT;
            mantissa[n + 1] /= RESCALE_AT;
            level[n] = cur;
            level[n + 1] = cur;
        }
        a_prev = a_n;
    }
    HalfLineSolution {
        energy,
        seed,
        mantissa,
        level,
    }
}

/// The exponentially decaying solution, computed by backward recursion from its exact
/// geometric tail. Exists when the operator is eventually constant `(a, b)` and
/// `|E - b| > 2|a|` by a visible margin; normalized to `max(|u_0|, |u_1|) = 1`.
///
/// Forward iteration of a decaying solution picks up the growing one at rounding level and
/// is swamped after a few dozen sites; this is the stable way to get its tail.
pub fn minimal_solution(
    op: &HalfLineOperator,
    energy: f64,
    length: usize,
) -> Option<HalfLineSolution> {
    let (p, a, b) = op.constant_from()?;
    let w = energy - b;
    let disc = w * w - 4.0 * a * a;
    // at the band edge the two roots merge and nothing decays geometrically
    if disc <= 1e-8 * w * w {
        return None;
    }
    let lambda = 2.0 * a / (w + w.signum() * disc.sqrt());
    let top = length.max(p + 1) + 1;
    Some(backward(op, energy, length, top, (1.0, lambda)))
}

/// Miller's backward recursion from `(u_top, u_top+1) = (1, 0)`. Approximates the
/// solution that is minimal (decays fastest relative to the others) by a relative error
/// of roughly `|v_n / v_top| |u_top / u_n|`, `v` a dominant solution; useful when the
/// decay is only algebraic and no exact tail is available.
pub fn miller_solution(
    op: &HalfLineOperator,
    energy: f64,
    length: usize,
    top: usize,
) -> HalfLineSolution {
    backward(op, energy, length, top.max(length + 1), (1.0, 0.0))
}

fn backward(
    op: &HalfLineOperator,
    energy: f64,
    length: usize,
    top: usize,
    start: (f64, f64),
) -> HalfLineSolution {
    // value_n = x[n] * 2^(300 k[n]); scaling by powers of two is exact
    let step = 2f64.powi(300);
    let (mut x_n, mut x_next) = start;
    let mut k = 0i32;
    let mut xs = vec![0.0f64; top + 1];
    let mut ks = vec![0i32; top + 1];
    xs[top] = x_n;
    for n in (1..=top).rev() {
        let a_prev = if n == 1 { 1.0 } else { op.a(n - 1) };
        let x_prev = ((energy - op.b(n)) * x_n - op.a(n) * x_next) / a_prev;
        x_next = x_n;
        x_n = x_prev;
        if x_n.abs().max(x_next.abs()) > step {
            x_n /= step;
            x_next /= step;
            k += 1;
        }
        xs[n - 1] = x_n;
        ks[n - 1] = k;
    }
    let norm = xs[0]
        .abs()
        .max(xs[1].abs() * 2f64.powi(300 * (ks[1] - ks[0])));
    let values: Vec<f64> = (0..=length)
        .map(|n| {
            let d = ks[n] - ks[0];
            // d <= 0; split the power so it underflows gracefully
            let mut v = xs[n] / norm;
            for _ in 0..(-d) {
                v /= step;
            }
            v
        })
        .collect();
    HalfLineSolution::from_values(energy, values)
}

/// Solution with boundary condition `theta` and `s = 1`, computed to index `length`.
pub fn iterate_solution(
    op: &HalfLineOperator,
    energy: f64,
    boundary: BoundaryCondition,
    length: usize,
) -> HalfLineSolution {
    iterate_from_seed(op, energy, boundary.seed(), length)
}

/// `ln ||u||_L^2` for the truncated norm with fractional last term.
pub fn ln_truncated_norm_sq(u: &HalfLineSolution, cumulative: &[f64], l: f64) -> Result<f64> {
    let whole = l.floor() as usize;
    let frac = l - l.floor();
    if whole + 1 > u.len() {
        return Err(Error::InsufficientLength {
            have: u.len(),
            need: whole + 1,
        });
    }
    let base = cumulative[whole];
    if frac == 0.0 {
        return Ok(base);
    }
    let m = u.mantissa(whole + 1);
    if m == 0.0 {
        return Ok(base);
    }
    Ok(ln_add(base, frac.ln() + 2.0 * u.ln_abs(whole + 1)))
}

/// `||u||_L = [sum_{n <= [L]} |u_n|^2 + (L - [L]) |u_{[L]+1}|^2]^(1/2)`.
pub fn truncated_norm(u: &HalfLineSolution, l: f64) -> Result<f64> {
    let c = u.ln_cumulative();
    Ok((0.5 * ln_truncated_norm_sq(u, &c, l)?).exp())
}

/// Largest `|a_n u_{n+1} - (E - b_n) u_n + a_{n-1} u_{n-1}|` relative to
/// `(|u_{n-1}| + |u_n| + |u_{n+1}|) max(|a|, |b|, |E|)`.
pub fn recurrence_residual(op: &HalfLineOperator, u: &HalfLineSolution) -> f64 {
    let mut worst = 0.0f64;
    for n in 1..u.len() {
        let (w, _) = u.window(n - 1, n + 1);
        let a_prev = if n == 1 { 1.0 } else { op.a(n - 1) };
        let (a_n, b_n) = (op.a(n), op.b(n));
        let r = a_n * w[2] - (u.energy - b_n) * w[1] + a_prev * w[0];
        let scale = (w[0].abs() + w[1].abs() + w[2].abs())
            * a_n
                .abs()
                .max(b_n.abs())
                .max(a_prev.abs())
                .max(u.energy.abs())
                .max(1e-300);
        if scale > 0.0 {
            worst = worst.max(r.abs() / scale);
        }
    }
    worst
}

/// Boundary value of an m-function: a complex number or the infinity marker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MBoundary {
    Value(Complex64),
    Infinity,
}

/// Relative size of the imaginary part below which a boundary value counts as real.
pub const REAL_TOLERANCE: f64 = 1e-9;

/// The boundary condition of the subordinate solution singled out by a real limit
/// `m(E + i0) = cot(theta)`; `None` when the limit is not real.
pub fn jl_theta_from_m(m: MBoundary) -> Option<BoundaryCondition> {
    match m {
        MBoundary::Infinity => Some(BoundaryCondition::dirichlet()),
        MBoundary::Value(c) => {
            if !c.re.is_finite() || !c.im.is_finite() {
                return None;
            }
            if c.im.abs() > REAL_TOLERANCE * (1.0 + c.re.abs()) {
                return None;
            }
            Some(BoundaryCondition::new(1.0f64.atan2(c.re)))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SubordinateExists,
    NoSubordinate,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubordinacyVerdict {
    pub energy: f64,
    pub verdict: Verdict,
    /// Boundary angle of the candidate (the subordinate solution when one exists).
    pub theta: Option<f64>,
    /// `(L, ||u_theta||_L / ||u_theta+pi/2||_L)` at the checkpoints.
    pub evidence: Vec<(f64, f64)>,
    /// Slope of `ln ratio` against `ln L` over the last decade.
    pub ratio_exponent: f64,
    /// Slope of `ln ||u_other||_L` against `L` over the last decade.
    pub growth_rate: f64,
}

#[derive(Clone, Debug)]
pub struct DetectConfig {
    pub l_max: f64,
    pub threshold: f64,
    pub threshold_hi: f64,
    pub window: usize,
    pub theta_grid: usize,
    /// `m(E + i0)` when known; its angle joins the candidate set.
    pub m_boundary: Option<MBoundary>,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            l_max: 1e4,
            threshold: 1e-2,
            threshold_hi: 5.0,
            window: 5,
            theta_grid: 64,
            m_boundary: None,
        }
    }
}

/// Ratios smaller than this are indistinguishable from rounding.
pub const RATIO_FLOOR: f64 = 1e-13;

/// Geometric checkpoints (factor sqrt 2) ending at `l_max`, none below 10.
pub fn checkpoints(l_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut l = l_max;
    while l >= 10.0 {
        out.push(l);
        l /= std::f64::consts::SQRT_2;
    }
    out.reverse();
    out
}

/// Two solutions sharing rescale levels so that linear combinations stay meaningful.
struct Basis {
    d: Vec<f64>,
    n: Vec<f64>,
    level: Vec<u32>,
}

impl Basis {
    fn new(op: &HalfLineOperator, energy: f64, length: usize) -> Self {
        let mut d = vec![0.0, 1.0];
        let mut n = vec![-1.0, 0.0];
        let mut level = vec![0u32, 0];
        let mut cur = 0;
        let mut a_prev = 1.0;
        for k in 1..length {
            let a_k = op.a(k);
            let c = energy - op.b(k);
            let dn = (c * d[k] - a_prev * d[k - 1]) / a_k;
            let nn = (c * n[k] - a_prev * n[k - 1]) / a_k;
            d.push(dn);
            n.push(nn);
            level.push(cur);
            if dn.abs().max(nn.abs()) > RESCALE_AT {
                cur += 1;
                d[k] /= RESCALE_AT;
                n[k] /= RESCALE_AT;
                d[k + 1] /= RESCALE_AT;
                n[k + 1] /= RESCALE_AT;
                level[k] = cur;
                level[k + 1] = cur;
            }
            a_prev = a_k;
        }
        Basis { d, n, level }
    }

    fn combination(&self, theta: f64) -> HalfLineSolution {
        let (s, c) = theta.sin_cos();
        let mantissa: Vec<f64> = self
            .d
            .iter()
            .zip(&self.n)
            .map(|(x, y)| c * x + s * y)
            .collect();
        HalfLineSolution {
            energy: 0.0,
            seed: (-s, c),
            mantissa,
            level: self.level.clone(),
        }
    }
}

fn ln_norms(u: &HalfLineSolution, ls: &[f64]) -> Vec<f64> {
    let c = u.ln_cumulative();
    ls.iter()
        .map(|&l| 0.5 * ln_truncated_norm_sq(u, &c, l).unwrap())
        .collect()
}

/// `(L, ratio)` trail of `u_theta` against `u_{theta + pi/2}`.
fn trail(basis: &Basis, theta: f64, ls: &[f64]) -> Vec<(f64, f64)> {
    let a = ln_norms(&basis.combination(theta), ls);
    let b = ln_norms(&basis.combination(theta + PI / 2.0), ls);
    ls.iter()
        .zip(a.iter().zip(&b))
        .map(|(&l, (x, y))| (l, (x - y).exp()))
        .collect()
}

fn ln_ratio_at(basis: &Basis, theta: f64, l: f64) -> f64 {
    let a = ln_norms(&basis.combination(theta), &[l])[0];
    let b = ln_norms(&basis.combination(theta + PI / 2.0), &[l])[0];
    a - b
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Non-increasing up to rounding, with values below the floor treated as equal.
pub fn monotone_decreasing(values: &[f64]) -> bool {
    values
        .windows(2)
        .all(|w| w[1].max(RATIO_FLOOR) <= w[0].max(RATIO_FLOOR) * (1.0 + 1e-9))
}

/// Searches for a subordinate solution at energy `E` by comparing truncated norms.
pub fn detect_subordinate(
    op: &HalfLineOperator,
    energy: f64,
    cfg: &DetectConfig,
) -> Result<SubordinacyVerdict> {
    if cfg.l_max < 100.0 {
        return Err(Error::Precondition(
            "detect_subordinate needs L_max >= 100".into(),
        ));
    }
    let length = cfg.l_max.ceil() as usize + 2;
    let basis = Basis::new(op, energy, length);
    let l = cfg.l_max;

    let grid = cfg.theta_grid.max(4);
    let h = PI / grid as f64;
    let values: Vec<f64> = (0..grid)
        .map(|i| ln_ratio_at(&basis, i as f64 * h, l))
        .collect();
    let i_min = (0..grid)
        .min_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap())
        .unwrap();

    // golden-section refinement inside the bracket around the grid minimizer
    let (mut lo, mut hi) = ((i_min as f64 - 1.0) * h, (i_min as f64 + 1.0) * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = ln_ratio_at(&basis, x1, l);
    let mut f2 = ln_ratio_at(&basis, x2, l);
    while hi - lo > 1e-13 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = ln_ratio_at(&basis, x1, l);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = ln_ratio_at(&basis, x2, l);
        }
    }
    let mut candidates = vec![(i_min as f64 * h, values[i_min]), (x1, f1), (x2, f2)];
    if let Some(t) = cfg.m_boundary.and_then(jl_theta_from_m) {
        candidates.push((t.theta(), ln_ratio_at(&basis, t.theta(), l)));
    }
    let (theta, _) = candidates
        .into_iter()
        .filter(|(_, f)| f.is_finite())
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap_or((0.0, 0.0));
    let theta = BoundaryCondition::new(theta).theta();

    let ls = checkpoints(cfg.l_max);
    let evidence = trail(&basis, theta, &ls);
    let ratios: Vec<f64> = evidence.iter().map(|e| e.1).collect();
    let tail_from = ls.iter().position(|&x| x >= cfg.l_max / 10.0).unwrap_or(0);
    let ln_l: Vec<f64> = ls[tail_from..].iter().map(|x| x.ln()).collect();
    let ln_r: Vec<f64> = ratios[tail_from..]
        .iter()
        .map(|r| r.max(RATIO_FLOOR).ln())
        .collect();
    let other = ln_norms(&basis.combination(theta + PI / 2.0), &ls[tail_from..]);
    let ratio_exponent = slope(&ln_l, &ln_r);
    let growth_rate = slope(&ls[tail_from..], &other);

    let last = *ratios.last().unwrap();
    let w = cfg.window.min(ratios.len());
    let verdict = if last < cfg.threshold && monotone_decreasing(&ratios[ratios.len() - w..]) {
        Verdict::SubordinateExists
    } else if ratios
        .iter()
        .all(|&r| r >= 1.0 / cfg.threshold_hi && r <= cfg.threshold_hi)
    {
        Verdict::NoSubordinate
    } else {
        Verdict::Inconclusive
    };
    Ok(SubordinacyVerdict {
        energy,
        verdict,
        theta: Some(theta),
        evidence,
        ratio_exponent,
        growth_rate,
    })
}

/// Ratio trail of the solution with seed `seed` against its perpendicular partner.
pub fn ratio_evidence(
    op: &HalfLineOperator,
    energy: f64,
    seed: (f64, f64),
    l_max: f64,
) -> Vec<(f64, f64)> {
    let length = l_max.ceil() as usize + 2;
    let basis = Basis::new(op, energy, length);
    let theta = BoundaryCondition::from_seed(seed.0, seed.1).theta();
    trail(&basis, theta, &checkpoints(l_max))
}

/// Tail-sum evidence that a solution is square summable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct L2Evidence {
    /// `(window start, window end, window sum / running total)`.
    pub windows: Vec<(usize, usize, f64)>,
    pub passed: bool,
}

/// Share of the running total carried by the geometric windows `[2^j, 2^{j+1})`.
///
/// Once the shares have decreased over at least three consecutive windows, the remaining
/// tail is projected as a geometric series with the last ratio `r`, i.e.
/// `share * r / (1 - r)`; the evidence passes at the first window where that projection
/// falls below `threshold`. Only the first passage counts: a decaying solution computed
/// forward eventually picks up a growing one at rounding level.
pub fn l2_evidence(u: &HalfLineSolution, threshold: f64) -> L2Evidence {
    let c = u.ln_cumulative();
    let mut windows = Vec::new();
    let mut start = 8usize;
    let mut passed = false;
    let mut decreasing = 0;
    let mut prev = f64::INFINITY;
    while 2 * start <= u.len() {
        let end = 2 * start;
        let total = c[end - 1];
        let before = c[start - 1];
        let share = if total == f64::NEG_INFINITY {
            0.0
        } else {
            let w = 1.0 - (before - total).exp();
            w.max(0.0)
        };
        windows.push((start, end, share));
        // a window that underflows to zero: no two consecutive values of a nonzero
        // solution vanish, so the tail is below the double range
        if share == 0.0 {
            passed = true;
            break;
        }
        if share < prev {
            decreasing += 1;
        } else {
            decreasing = 0;
        }
        if decreasing >= 3 {
            let r = share / prev;
            if share * r / (1.0 - r) < threshold {
                passed = true;
                break;
            }
        }
        prev = share;
        start = end;
    }
    L2Evidence { windows, passed }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_dirichlet_at_zero() {
        let u = iterate_solution(
            &HalfLineOperator::free(),
            0.0,
            BoundaryCondition::dirichlet(),
            12,
        );
        let want = [0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0];
        for (n, w) in want.iter().enumerate() {
            assert_eq!(u.value(n), *w);
        }
    }

    #[test]
    fn neumann_seed() {
        let b = BoundaryCondition::new(PI / 2.0);
        let (u0, u1) = b.seed();
        assert_eq!(u0, -1.0);
        assert!(u1.abs() < 1e-16);
    }

    #[test]
    fn growth_at_three() {
        let lambda = (3.0 + 5f64.sqrt()) / 2.0;
        let u = iterate_solution(
            &HalfLineOperator::free(),
            3.0,
            BoundaryCondition::dirichlet(),
            2000,
        );
        let rate = (u.ln_abs(2000) - u.ln_abs(1000)) / 1000.0;
        assert!((rate - lambda.ln()).abs() < 1e-12);
        assert!(u.level(2000) > 0);
    }

    #[test]
    fn truncated_norm_examples() {
        let ones = HalfLineSolution {
            energy: 0.0,
            seed: (1.0, 1.0),
            mantissa: vec![1.0; 10],
            level: vec![0; 10],
        };
        assert!((truncated_norm(&ones, 2.5).unwrap() - 2.5f64.sqrt()).abs() < 1e-15);
        let u = iterate_solution(
            &HalfLineOperator::free(),
            0.0,
            BoundaryCondition::dirichlet(),
            12,
        );
        assert!((truncated_norm(&u, 4.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(truncated_norm(&u, 11.5).is_ok());
        assert!(matches!(
            truncated_norm(&u, 12.5),
            Err(Error::InsufficientLength { .. })
        ));
    }

    #[test]
    fn theta_from_m() {
        let t = jl_theta_from_m(MBoundary::Value(Complex64::new(1.0, 0.0))).unwrap();
        assert!((t.theta() - PI / 4.0).abs() < 1e-15);
        let t = jl_theta_from_m(MBoundary::Value(Complex64::new(0.0, 0.0))).unwrap();
        assert!((t.theta() - PI / 2.0).abs() < 1e-15);
        assert!(jl_theta_from_m(MBoundary::Value(Complex64::new(0.5, 0.3))).is_none());
        assert_eq!(jl_theta_from_m(MBoundary::Infinity).unwrap().theta(), 0.0);
        let t = jl_theta_from_m(MBoundary::Value(Complex64::new(-2.0, 0.0))).unwrap();
        assert!((1.0 / t.theta().tan() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn seed_roundtrip() {
        for t in [0.0, 0.3, 1.2, 2.9] {
            let b = BoundaryCondition::new(t);
            let (u0, u1) = b.seed();
            assert!((BoundaryCondition::from_seed(3.0 * u0, 3.0 * u1).theta() - t).abs() < 1e-14);
            assert!((BoundaryCondition::from_seed(-u0, -u1).theta() - t).abs() < 1e-14);
        }
    }

    #[test]
    fn detect_free_examples() {
        let op = HalfLineOperator::free();
        let cfg = DetectConfig::default();
        assert_eq!(
            detect_subordinate(&op, 0.0, &cfg).unwrap().verdict,
            Verdict::NoSubordinate
        );

        let v = detect_subordinate(&op, 3.0, &cfg).unwrap();
        assert_eq!(v.verdict, Verdict::SubordinateExists);
        // decaying solution: u_1/u_0 = (3 - sqrt 5)/2, i.e. cot(theta) = -(3 - sqrt 5)/2
        let m = -(3.0 - 5f64.sqrt()) / 2.0;
        assert!((1.0 / v.theta.unwrap().tan() - m).abs() < 1e-6);

        let v = detect_subordinate(&op, 2.0, &cfg).unwrap();
        assert_eq!(v.verdict, Verdict::SubordinateExists);
        // subordinate is the constant solution: u_0 = u_1
        // the minimizer at finite L is biased by O(1/L)
        assert!((v.theta.unwrap() - 3.0 * PI / 4.0).abs() < 1e-3);
        let exact = ratio_evidence(&op, 2.0, (1.0, 1.0), 1e4);
        let (l0, r0) = exact[exact.len() - 8];
        let (l1, r1) = exact[exact.len() - 1];
        assert!(((r1 / r0).ln() / (l1 / l0).ln() + 1.0).abs() < 0.05);
    }

    #[test]
    fn l2_evidence_geometric() {
        let op = HalfLineOperator::free();
        // decaying solution at E = 3 starting from the exact ratio
        let lam = (3.0 - 5f64.sqrt()) / 2.0;
        let u = minimal_solution(&op, 3.0, 400).unwrap();
        assert!(
            (u.value(1) / u.value(0) - lam).abs() < 1e-14,
            "{} {} {}",
            u.value(0),
            u.value(1),
            lam
        );
        assert!((u.value(300) / u.value(299) - lam).abs() < 1e-12);
        assert!(l2_evidence(&u, 1e-8).passed);
        // forward iteration of the same seed loses the decay to rounding
        let f = iterate_from_seed(&op, 3.0, (1.0, lam), 400);
        assert!(!l2_evidence(&f, 1e-8).passed);
        let v = iterate_solution(&op, 0.0, BoundaryCondition::dirichlet(), 4096);
        assert!(!l2_evidence(&v, 1e-8).passed);
    }
}
