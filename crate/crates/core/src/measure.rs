//! Probability measures on the line and the Jacobi matrices they correspond to.
//!
//! A measure is a finite list of atoms plus at most one density from a small registry.
//! Recurrence coefficients are obtained by Lanczos on a discretization of the measure
//! (the Gragg–Harrod rational variant, which never forms moments), or, when only raw
//! moments are known, by the Chebyshev algorithm.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use gauss_quad::{FiniteAboveNegOneF64, GaussJacobi, GaussLegendre};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{JacobiCoefficients, StarLikeGraph};
use crate::mfunction::constant_tail_m;
use crate::sequence::{HalfLineData, HalfLineOperator, SpectralBranch, Tail};

/// Absolutely continuous parts, each normalized to unit mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Density {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// `(p + 1) x^p` on `(0, 1)`, `p > -1`.
    PowerLaw {
        p: f64,
    },
    /// `2 sqrt(R^2 - (x - c)^2) / (pi R^2)` on `[c - R, c + R]`.
    Semicircle {
        center: f64,
        radius: f64,
    },
    /// Piecewise linear through the points `(x[i], y[i])`, rescaled to unit mass.
    Table {
        x: Vec<f64>,
        y: Vec<f64>,
    },
}

impl Density {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::Precondition(s));
        match self {
            Density::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                bad(format!("uniform density needs lo < hi, got [{lo}, {hi}]"))
            }
            Density::PowerLaw { p } if !(p.is_finite() && *p > -1.0) => {
                bad(format!("power law needs p > -1, got {p}"))
            }
            Density::Semicircle { center, radius }
                if !(center.is_finite() && radius.is_finite() && *radius > 0.0) =>
            {
                bad(format!("semicircle needs a positive radius, got {radius}"))
            }
            Density::Table { x, y } => {
                if x.len() < 2 || x.len() != y.len() {
                    return bad("table needs at least two (x, y) points of equal length".into());
                }
                if x.windows(2).any(|w| !(w[0] < w[1])) || x.iter().any(|v| !v.is_finite()) {
                    return bad("table x values must be finite and strictly increasing".into());
                }
                if y.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("table y values must be finite and nonnegative".into());
                }
                if self.table_area() <= 0.0 {
                    return bad("table has zero area".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            Density::Uniform { lo, hi } => (*lo, *hi),
            Density::PowerLaw { .. } => (0.0, 1.0),
            Density::Semicircle { center, radius } => (center - radius, center + radius),
            Density::Table { x, .. } => (x[0], x[x.len() - 1]),
        }
    }

    fn table_area(&self) -> f64 {
        match self {
            Density::Table { x, y } => x
                .windows(2)
                .zip(y.windows(2))
                .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
                .sum(),
            _ => 1.0,
        }
    }

    /// Normalization constant: the raw integral the density is divided by.
    pub fn normalization(&self) -> f64 {
        match self {
            Density::Uniform { lo, hi } => hi - lo,
            Density::PowerLaw { p } => 1.0 / (p + 1.0),
            Density::Semicircle { radius, .. } => PI * radius * radius / 2.0,
            Density::Table { .. } => self.table_area(),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x > lo && x < hi) {
            return 0.0;
        }
        match self {
            Density::Uniform { lo, hi } => 1.0 / (hi - lo),
            Density::PowerLaw { p } => (p + 1.0) * x.powf(*p),
            Density::Semicircle { center, radius } => {
                let d = x - center;
                2.0 * (radius * radius - d * d).max(0.0).sqrt() / (PI * radius * radius)
            }
            Density::Table { x: xs, y } => {
                let i = xs
                    .partition_point(|&v| v <= x)
                    .saturating_sub(1)
                    .min(xs.len() - 2);
                let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
                (y[i] + t * (y[i + 1] - y[i])) / self.table_area()
            }
        }
    }

    /// `int rho(x) / (x - z) dx` in closed form (general power laws fall back to quadrature).
    pub fn borel(&self, z: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match self {
            Density::Uniform { lo, hi } => ((*hi - z).ln() - (*lo - z).ln()) / (hi - lo),
            Density::PowerLaw { p } if *p == 0.0 => (one - z).ln() - (-z).ln(),
            Density::PowerLaw { p } if *p == -0.5 => {
                // x = t^2 turns it into int_0^1 dt / (t^2 + w^2), w = sqrt(-z)
                let w = (-z).sqrt();
                (one / w).atan() / w
            }
            Density::PowerLaw { .. } => self
                .borel_by_quadrature(z)
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
            Density::Semicircle { center, radius } => {
                let zeta = 2.0 * (z - center) / radius;
                2.0 / radius * constant_tail_m(zeta, 1.0, 0.0)
            }
            Density::Table { x, y } => {
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..x.len() - 1 {
                    let h = x[i + 1] - x[i];
                    let slope = (y[i + 1] - y[i]) / h;
                    let log = (x[i + 1] - z).ln() - (x[i] - z).ln();
                    s += slope * h + (y[i] + slope * (z - x[i])) * log;
                }
                s / self.table_area()
            }
        }
    }

    /// `int f(x) rho(x) dx` by adaptive Gauss–Legendre after a substitution that removes
    /// the endpoint behavior of `rho`. Returns the value and an error estimate.
    pub fn integrate(&self, f: &dyn Fn(f64) -> Complex64, tol: f64) -> Result<(Complex64, f64)> {
        match self {
            Density::Uniform { lo, hi } => {
                let (v, e) = adaptive_gl(&|x| f(x), *lo, *hi, tol * (hi - lo))?;
                Ok((v / (hi - lo), e / (hi - lo)))
            }
            Density::PowerLaw { p } => {
                // x = t^(1/(p+1)) makes the weight uniform on (0, 1)
                let q = 1.0 / (p + 1.0);
                adaptive_gl(&|t| f(t.powf(q)), 0.0, 1.0, tol)
            }
            Density::Semicircle { center, radius } => {
                let g = |phi: f64| {
                    let s = phi.sin();
                    f(center + radius * phi.cos()) * (2.0 / PI * s * s)
                };
                adaptive_gl(&g, 0.0, PI, tol)
            }
            Density::Table { x, y } => {
                let area = self.table_area();
                let (mut v, mut e) = (Complex64::new(0.0, 0.0), 0.0);
                for i in 0..x.len() - 1 {
                    let (x0, x1, y0, y1) = (x[i], x[i + 1], y[i], y[i + 1]);
                    let g = |s: f64| f(s) * ((y0 + (s - x0) / (x1 - x0) * (y1 - y0)) / area);
                    let (pv, pe) = adaptive_gl(&g, x0, x1, tol / (x.len() as f64))?;
                    v += pv;
                    e += pe;
                }
                Ok((v, e))
            }
        }
    }

    pub fn borel_by_quadrature(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.integrate(&|x| 1.0 / (x - z), 1e-13)?.0)
    }

    /// Quadrature nodes and weights (summing to 1) with `k` nodes. For every density but
    /// general power laws and tables this is the `k`-point Gauss rule of the density itself,
    /// exact for polynomials of degree `2k - 1`.
    pub fn nodes(&self, k: usize) -> Vec<(f64, f64)> {
        let k = k.max(1);
        match self {
            Density::Uniform { lo, hi } => legendre(k)
                .iter()
                .map(|&(t, w)| (0.5 * (lo + hi) + 0.5 * (hi - lo) * t, 0.5 * w))
                .collect(),
            Density::PowerLaw { p } if *p == -0.5 => {
                // the positive half of the 2k-point Legendre rule, squared
                legendre(2 * k)
                    .iter()
                    .filter(|(t, _)| *t > 0.0)
                    .map(|&(t, w)| (t * t, w))
                    .collect()
            }
            Density::PowerLaw { p } if *p == 0.0 => Density::Uniform { lo: 0.0, hi: 1.0 }.nodes(k),
            Density::PowerLaw { p } if k <= JACOBI_RULE_LIMIT => {
                let beta = FiniteAboveNegOneF64::new(*p).expect("validated");
                let alpha = FiniteAboveNegOneF64::new(0.0).expect("zero");
                let rule = GaussJacobi::new(NonZeroUsize::new(k).expect("k >= 1"), alpha, beta);
                let pairs = rule.as_node_weight_pairs();
                let total: f64 = pairs.iter().map(|(_, w)| w).sum();
                pairs
                    .iter()
                    .map(|&(s, w)| (0.5 * (1.0 + s), w / total))
                    .collect()
            }
            Density::PowerLaw { p } => {
                let q = 1.0 / (p + 1.0);
                legendre(k)
                    .iter()
                    .map(|&(t, w)| ((0.5 * (1.0 + t)).powf(q), 0.5 * w))
                    .collect()
            }
            Density::Semicircle { center, radius } => (1..=k)
                .map(|j| {
                    let phi = j as f64 * PI / (k as f64 + 1.0);
                    let s = phi.sin();
                    (center + radius * phi.cos(), 2.0 / (k as f64 + 1.0) * s * s)
                })
                .collect(),
            Density::Table { x, y } => {
                let area = self.table_area();
                let per = k.div_ceil(x.len() - 1).max(2);
                let rule = legendre(per);
                let mut out = Vec::with_capacity(per * (x.len() - 1));
                for i in 0..x.len() - 1 {
                    let (x0, x1) = (x[i], x[i + 1]);
                    let h = x1 - x0;
                    for &(t, w) in rule.iter() {
                        let s = 0.5 * (1.0 - t);
                        let xv = x0 + s * h;
                        let yv = y[i] + s * (y[i + 1] - y[i]);
                        out.push((xv, 0.5 * w * h * yv / area));
                    }
                }
                out
            }
        }
    }
}

/// Gauss–Jacobi rules are built by an eigenvalue solve; above this size the power-law
/// discretization falls back to a substituted Legendre rule.
const JACOBI_RULE_LIMIT: usize = 600;

fn legendre(k: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(NonZeroUsize::new(k).expect("k >= 1"))
        .as_node_weight_pairs()
        .to_vec()
}

fn panel_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| legendre(20))
}

fn panel(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> Complex64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    panel_rule()
        .iter()
        .map(|&(t, w)| f(c + h * t) * w)
        .sum::<Complex64>()
        * h
}

/// Adaptive 20-point Gauss–Legendre with interval halving; `tol` is absolute.
pub fn adaptive_gl(
    f: &dyn Fn(f64) -> Complex64,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<(Complex64, f64)> {
    fn go(
        f: &dyn Fn(f64) -> Complex64,
        a: f64,
        b: f64,
        whole: Complex64,
        tol: f64,
        depth: u32,
    ) -> Result<(Complex64, f64)> {
        let m = 0.5 * (a + b);
        let (l, r) = (panel(f, a, m), panel(f, m, b));
        let sum = l + r;
        let err = (sum - whole).norm();
        if err <= tol.max(8.0 * f64::EPSILON * sum.norm()) {
            return Ok((sum, err));
        }
        if depth >= 60 || !err.is_finite() {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a}, {b}] (error {err:e})"
            )));
        }
        let (x, e1) = go(f, a, m, l, tol * std::f64::consts::FRAC_1_SQRT_2, depth + 1)?;
        let (y, e2) = go(f, m, b, r, tol * std::f64::consts::FRAC_1_SQRT_2, depth + 1)?;
        Ok((x + y, e1 + e2))
    }
    if a == b {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    go(f, a, b, panel(f, a, b), tol, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureKind {
    Mixture,
    Density,
    Atomic,
}

/// A probability measure: atoms `(location, weight)` plus an optional density carrying the
/// remaining mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<Density>,
    /// Mass of the density part; defaults to whatever the atoms leave over.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_weight: Option<f64>,
    /// Atoms-only measures give finite Jacobi matrices and must say so.
    #[serde(default)]
    pub finite: bool,
}

impl MeasureSpec {
    pub fn from_density(d: Density) -> Self {
        MeasureSpec {
            atoms: Vec::new(),
            density: Some(d),
            density_weight: None,
            finite: false,
        }
    }

    pub fn from_atoms(atoms: Vec<(f64, f64)>) -> Self {
        MeasureSpec {
            atoms,
            density: None,
            density_weight: None,
            finite: true,
        }
    }

    pub fn mixture(atoms: Vec<(f64, f64)>, d: Density) -> Self {
        MeasureSpec {
            atoms,
            density: Some(d),
            density_weight: None,
            finite: false,
        }
    }

    /// `1/2 delta_0 + 1/2 Uniform[0, 1]`.
    pub fn half_atom_half_uniform() -> Self {
        Self::mixture(vec![(0.0, 0.5)], Density::Uniform { lo: 0.0, hi: 1.0 })
    }

    /// Density `1 / (2 sqrt x)` on `(0, 1)`.
    pub fn inverse_sqrt() -> Self {
        Self::from_density(Density::PowerLaw { p: -0.5 })
    }

    pub fn kind(&self) -> MeasureKind {
        match (self.atoms.is_empty(), self.density.is_some()) {
            (true, true) => MeasureKind::Density,
            (false, true) => MeasureKind::Mixture,
            _ => MeasureKind::Atomic,
        }
    }

    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn density_mass(&self) -> f64 {
        match (&self.density, self.density_weight) {
            (None, _) => 0.0,
            (Some(_), Some(w)) => w,
            (Some(_), None) => 1.0 - self.atom_mass(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for &(x, w) in &self.atoms {
            if !(x.is_finite() && w.is_finite() && w > 0.0) {
                return Err(Error::Precondition(format!(
                    "atom ({x}, {w}) needs a finite location and positive weight"
                )));
            }
        }
        if let Some(d) = &self.density {
            d.validate()?;
            if !(self.density_mass() > 0.0) {
                return Err(Error::Precondition("density part has no mass".into()));
            }
        } else if !self.finite {
            return Err(Error::Precondition(
                "atoms-only measure: set finite = true to accept a finite Jacobi matrix".into(),
            ));
        }
        let total = self.atom_mass() + self.density_mass();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("total mass {total} is not 1")));
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(x, _) in &self.atoms {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        if let Some(d) = &self.density {
            let (a, b) = d.support();
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }

    pub fn support_radius(&self) -> f64 {
        let (lo, hi) = self.support();
        lo.abs().max(hi.abs())
    }

    /// Borel transform `int dmu(x) / (x - z)`.
    pub fn borel(&self, z: Complex64) -> Complex64 {
        let mut s: Complex64 = self.atoms.iter().map(|&(x, w)| w / (x - z)).sum();
        if let Some(d) = &self.density {
            s += self.density_mass() * d.borel(z);
        }
        s
    }

    /// Borel transform with the density part integrated numerically.
    pub fn borel_by_quadrature(&self, z: Complex64) -> Result<Complex64> {
        let mut s: Complex64 = self.atoms.iter().map(|&(x, w)| w / (x - z)).sum();
        if let Some(d) = &self.density {
            s += self.density_mass() * d.borel_by_quadrature(z)?;
        }
        Ok(s)
    }

    /// Atoms plus `k` density nodes, weights summing to 1.
    pub fn discretize(&self, k: usize) -> (Vec<f64>, Vec<f64>) {
        let mut x: Vec<f64> = self.atoms.iter().map(|a| a.0).collect();
        let mut w: Vec<f64> = self.atoms.iter().map(|a| a.1).collect();
        if let Some(d) = &self.density {
            let dm = self.density_mass();
            for (xi, wi) in d.nodes(k) {
                x.push(xi);
                w.push(dm * wi);
            }
        }
        (x, w)
    }
}

#[derive(Clone, Debug)]
pub struct MomentSequence {
    pub moments: Vec<f64>,
    /// Absolute quadrature error estimate per moment.
    pub errors: Vec<f64>,
    pub source: Option<Arc<MeasureSpec>>,
}

impl MomentSequence {
    pub fn from_raw(moments: Vec<f64>) -> Self {
        let errors = vec![0.0; moments.len()];
        MomentSequence {
            moments,
            errors,
            source: None,
        }
    }

    /// Largest `n` for which the Hankel matrix `(m_{i+j})_{i,j<n}` passes Cholesky.
    pub fn hankel_depth(&self) -> usize {
        let max = self.moments.len().div_ceil(2);
        let mut depth = 0;
        for n in 1..=max {
            if 2 * n - 2 >= self.moments.len() {
                break;
            }
            let h = DMatrix::from_fn(n, n, |i, j| self.moments[i + j]);
            if h.cholesky().is_none() {
                break;
            }
            depth = n;
        }
        depth
    }
}

/// `m_k = int x^k dmu` for `k < count`: exact atom sums plus adaptive quadrature.
pub fn moments(spec: &MeasureSpec, count: usize) -> Result<MomentSequence> {
    spec.validate()?;
    let mut out = Vec::with_capacity(count);
    let mut errors = Vec::with_capacity(count);
    for k in 0..count {
        let atoms: f64 = spec.atoms.iter().map(|&(x, w)| w * x.powi(k as i32)).sum();
        let (dens, err) = match &spec.density {
            Some(d) => {
                let (v, e) = d.integrate(&|x| Complex64::new(x.powi(k as i32), 0.0), 1e-15)?;
                (spec.density_mass() * v.re, spec.density_mass() * e)
            }
            None => (0.0, 0.0),
        };
        if err > 1e-12 * (1.0 + dens.abs()) {
            return Err(Error::Quadrature(format!(
                "moment {k}: error estimate {err:e}"
            )));
        }
        out.push(atoms + dens);
        errors.push(err);
    }
    Ok(MomentSequence {
        moments: out,
        errors,
        source: Some(Arc::new(spec.clone())),
    })
}

/// Recurrence coefficients `b_1..b_N`, `a_1..a_{N-1}` of the orthonormal polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiPrefix {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    /// Depth at which the measure ran out of support points (or the Hankel matrix lost
    /// positivity); the matrix is then finite.
    pub breakdown: Option<usize>,
    /// Some coefficient exceeded twice the support radius.
    pub unbounded: bool,
}

impl JacobiPrefix {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Constant tail continuing the prefix: the last computed `(a, b)` pair.
    pub fn tail(&self) -> Option<(f64, f64)> {
        if self.breakdown.is_some() {
            return None;
        }
        Some((*self.a.last()?, *self.b.last()?))
    }

    /// m-function of the prefix, finite if it broke down and continued by [`Self::tail`]
    /// otherwise.
    pub fn m(&self, z: Complex64) -> Complex64 {
        let n = self.b.len();
        let (mut m, a_last) = match self.tail() {
            Some((a, b)) => (constant_tail_m(z, a, b), a),
            None => (Complex64::new(0.0, 0.0), 0.0),
        };
        for j in (1..=n).rev() {
            let a = if j == n { a_last } else { self.a[j - 1] };
            m = 1.0 / (self.b[j - 1] - z - a * a * m);
        }
        m
    }

    /// The half-line operator `b(1) = b_1 + shift`, the rest from the prefix and its tail.
    pub fn operator(&self, shift: f64) -> Result<HalfLineOperator> {
        let (a, b) = self.tail().ok_or_else(|| {
            Error::Precondition("finite Jacobi matrix has no half-line operator".into())
        })?;
        let mut op = HalfLineOperator::from_prefix(&self.b, &self.a, Tail::Constant { a, b });
        op.origin_b += shift;
        Ok(op)
    }
}

/// Lanczos on the discrete measure `sum w_i delta_{x_i}` in the rational form of Gragg and
/// Harrod. Returns the first `n` levels (fewer, flagged, if the measure has fewer points).
pub fn lanczos(x: &[f64], w: &[f64], n: usize) -> JacobiPrefix {
    let k = x.len();
    let mut p0 = x.to_vec();
    let mut p1 = vec![0.0; k];
    if k > 0 {
        p1[0] = w[0];
    }
    for m in 0..k.saturating_sub(1) {
        let mut pn = w[m + 1];
        let (mut gam, mut sig, mut t) = (1.0f64, 0.0f64, 0.0f64);
        let xlam = x[m + 1];
        for j in 0..=m + 1 {
            let rho = p1[j] + pn;
            let tmp = gam * rho;
            let tsig = sig;
            if rho <= 0.0 {
                gam = 1.0;
                sig = 0.0;
            } else {
                gam = p1[j] / rho;
                sig = pn / rho;
            }
            let tk = sig * (p0[j] - xlam) - gam * t;
            p0[j] -= tk - t;
            t = tk;
            if sig <= 0.0 {
                pn = tsig * p1[j];
            } else {
                pn = t * t / sig;
            }
            p1[j] = tmp;
        }
    }
    // p0[j] = b_{j+1}, p1[j] = a_j^2 for j >= 1
    let scale = x.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let mut depth = n.min(k);
    let mut breakdown = if n > k { Some(k) } else { None };
    for j in 1..depth {
        if p1[j] <= 1e-26 * scale * scale {
            depth = j;
            breakdown = Some(j);
            break;
        }
    }
    JacobiPrefix {
        b: p0[..depth].to_vec(),
        a: p1[1..depth].iter().map(|v| v.sqrt()).collect(),
        breakdown,
        unbounded: false,
    }
}

/// Recurrence coefficients from raw moments `m_0..m_{2N-1}` (Chebyshev algorithm). Only
/// usable for small `N`: the map from moments to coefficients is exponentially
/// ill-conditioned.
pub fn chebyshev_algorithm(moments: &[f64]) -> JacobiPrefix {
    let n = moments.len() / 2;
    let mut b = Vec::new();
    let mut a = Vec::new();
    if n == 0 || !(moments[0] > 0.0) {
        return JacobiPrefix {
            b,
            a,
            breakdown: Some(0),
            unbounded: false,
        };
    }
    let width = 2 * n;
    // sigma_{k,l} = int pi_k x^l, rows k-1 and k kept
    let mut prev = vec![0.0; width];
    let mut cur = moments[..width].to_vec();
    let mut alpha = moments[1] / moments[0];
    let mut beta = moments[0];
    b.push(alpha);
    let mut breakdown = None;
    for k in 1..n {
        let mut next = vec![0.0; width];
        for l in k..(width - k) {
            next[l] = cur[l + 1] - alpha * cur[l] - beta * prev[l];
        }
        if !(next[k] > 1e-300) || !(cur[k - 1] > 0.0) {
            breakdown = Some(k);
            break;
        }
        let new_alpha = next[k + 1] / next[k] - cur[k] / cur[k - 1];
        let new_beta = next[k] / cur[k - 1];
        alpha = new_alpha;
        beta = new_beta;
        b.push(alpha);
        a.push(beta.sqrt());
        prev = cur;
        cur = next;
    }
    JacobiPrefix {
        b,
        a,
        breakdown,
        unbounded: false,
    }
}

/// The first `n` recurrence levels of a measure, by Lanczos on its Gauss discretization.
pub fn jacobi_from_measure(spec: &MeasureSpec, n: usize) -> Result<JacobiPrefix> {
    spec.validate()?;
    let k = if spec.density.is_some() { n + 8 } else { 0 };
    let (x, w) = spec.discretize(k);
    let mut prefix = lanczos(&x, &w, n);
    let limit = 2.0 * spec.support_radius().max(f64::MIN_POSITIVE);
    prefix.unbounded = prefix
        .a
        .iter()
        .chain(prefix.b.iter())
        .any(|v| v.abs() > limit * (1.0 + 1e-12));
    Ok(prefix)
}

/// Coefficients behind a moment sequence `m_0..m_{2N}`. Sequences that remember their
/// measure go through [`jacobi_from_measure`]; bare sequences through the Chebyshev
/// algorithm.
pub fn jacobi_from_moments(ms: &MomentSequence) -> Result<JacobiPrefix> {
    let n = ms.moments.len().saturating_sub(1) / 2;
    if n == 0 {
        return Err(Error::Precondition("need at least m_0, m_1, m_2".into()));
    }
    match &ms.source {
        Some(spec) => jacobi_from_measure(spec, n),
        None => Ok(chebyshev_algorithm(&ms.moments[..2 * n])),
    }
}

/// Gauss rule of a prefix: eigenvalues of the `N x N` Jacobi matrix and squared first
/// eigenvector components.
pub fn gauss_rule(prefix: &JacobiPrefix) -> (Vec<f64>, Vec<f64>) {
    let n = prefix.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = prefix.b[i];
        if i + 1 < n {
            m[(i, i + 1)] = prefix.a[i];
            m[(i + 1, i)] = prefix.a[i];
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| (eig.eigenvalues[j], eig.eigenvectors[(0, j)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Largest deviation between the prefix m-function and the quadrature Borel transform.
pub fn roundtrip_check(prefix: &JacobiPrefix, spec: &MeasureSpec, zs: &[Complex64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &z in zs {
        let d = (prefix.m(z) - spec.borel_by_quadrature(z)?).norm();
        worst = worst.max(d);
    }
    Ok(worst)
}

fn prefix_cache() -> &'static DashMap<String, Arc<JacobiPrefix>> {
    static CACHE: OnceLock<DashMap<String, Arc<JacobiPrefix>>> = OnceLock::new();
    CACHE.get_or_init(DashMap::new)
}

/// [`jacobi_from_measure`], memoized per process.
pub fn cached_prefix(spec: &MeasureSpec, n: usize) -> Result<Arc<JacobiPrefix>> {
    let key = format!("{spec:?}/{n}");
    if let Some(p) = prefix_cache().get(&key) {
        return Ok(p.clone());
    }
    let p = Arc::new(jacobi_from_measure(spec, n)?);
    prefix_cache().insert(key, p.clone());
    Ok(p)
}

/// Half-line data for a branch whose slice operator is `J_theta + tan(theta) <d1,.> d1`,
/// `J_theta` being the Jacobi matrix of `spec`. Returns the root's diagonal entry too.
pub fn measure_branch(spec: &MeasureSpec, depth: usize, theta: f64) -> Result<(f64, HalfLineData)> {
    let prefix = cached_prefix(spec, depth)?;
    let shift = theta.tan();
    let op = prefix.operator(shift)?;
    let mut data = op.data;
    data.spectral = Some(SpectralBranch {
        measure: Arc::new(spec.clone()),
        shift,
        depth: prefix.len(),
        origin_b: op.origin_b,
    });
    Ok((op.origin_b, data))
}

#[derive(Clone, Debug)]
pub struct Example52Options {
    /// Measure of the branches at `v1` and `v2`; needs an atom at 0.
    pub mu1: MeasureSpec,
    /// Measure of the branch at `v3`.
    pub mu2: MeasureSpec,
    pub depth: usize,
    pub theta: f64,
}

impl Default for Example52Options {
    fn default() -> Self {
        Example52Options {
            mu1: MeasureSpec::half_atom_half_uniform(),
            mu2: MeasureSpec::inverse_sqrt(),
            depth: 1 << 15,
            theta: PI / 4.0,
        }
    }
}

/// Triangle `v1 v2 v3` with unit edges and a half-line at every corner. The branches at
/// `v1` and `v2` come from `mu1`, the one at `v3` from `mu2`, each as `J_theta` of its
/// measure with the origin diagonal raised by `tan(theta)`.
///
/// At `E = 0` the vector equal to the `mu1` eigenvector on the first branch, its negative
/// on the second and zero on the third is an eigenvector; a second subordinate solution
/// lives on branches one and three.
pub fn build_example_5_2_with(
    opts: &Example52Options,
) -> Result<(StarLikeGraph, JacobiCoefficients)> {
    let (graph, mut coeffs) = crate::graph::shapes::triangle();
    for (root, spec) in [("v1", &opts.mu1), ("v2", &opts.mu1), ("v3", &opts.mu2)] {
        let (b, data) = measure_branch(spec, opts.depth, opts.theta)?;
        coeffs.set_b(root, b);
        coeffs.set_halfline(root, data);
    }
    Ok((graph, coeffs))
}

pub fn build_example_5_2() -> (StarLikeGraph, JacobiCoefficients) {
    static BUILT: OnceLock<(StarLikeGraph, JacobiCoefficients)> = OnceLock::new();
    BUILT
        .get_or_init(|| {
            build_example_5_2_with(&Example52Options::default())
                .expect("default measures are valid")
        })
        .clone()
}
