//! Half-line m-functions `m(z) = <d_1, (J - z)^{-1} d_1>`.
//!
//! Evaluated by the backward continued fraction
//!
//! ```text
//! m^(j-1)(z) = 1 / (b_j - z - a_j^2 m^(j)(z)),   m = m^(0)
//! ```
//!
//! For an eventually constant tail the recursion starts from the exact fixed point of the
//! tail; otherwise from `m^(N) = 0` with `N` doubled until two passes agree. Branches that
//! carry an exact spectral measure are evaluated through its Borel transform instead.

use dashmap::DashMap;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sequence::HalfLineOperator;

#[derive(Clone, Copy, Debug)]
pub struct DepthControl {
    pub initial: usize,
    pub growth: usize,
    pub tolerance: f64,
    pub max_depth: usize,
}

impl Default for DepthControl {
    fn default() -> Self {
        DepthControl {
            initial: 64,
            growth: 2,
            tolerance: 1e-13,
            max_depth: 1 << 23,
        }
    }
}

/// m-function of the constant half-line `a_n = a`, `b_n = b`: the root of
/// `a^2 m^2 - (b - z) m + 1 = 0` with `|m| <= 1/|a|` (the Herglotz root when `Im z > 0`).
pub fn constant_tail_m(z: Complex64, a: f64, b: f64) -> Complex64 {
    let w = Complex64::new(b, 0.0) - z;
    let s = (w * w - 4.0 * a * a).sqrt();
    let (p, q) = (w + s, w - s);
    let big = if p.norm() >= q.norm() { p } else { q };
    if big.norm() == 0.0 {
        return Complex64::new(0.0, 1.0 / a.abs());
    }
    let small = 2.0 / big;
    let other = big / (2.0 * a * a);
    // on the band both roots have modulus 1/|a|; take the upper one
    if (small.norm() - other.norm()).abs() <= 1e-14 * small.norm() && other.im > small.im {
        return other;
    }
    small
}

/// Cache key for `z`.
fn key(z: Complex64) -> (u64, u64) {
    (z.re.to_bits(), z.im.to_bits())
}

const CACHE_LIMIT: usize = 1 << 16;

pub struct MFunctionEvaluator {
    op: HalfLineOperator,
    depth: DepthControl,
    cache: DashMap<(u64, u64), Complex64>,
    use_spectral: bool,
}

impl MFunctionEvaluator {
    pub fn new(op: HalfLineOperator) -> Self {
        Self::with_depth(op, DepthControl::default())
    }

    pub fn with_depth(op: HalfLineOperator, depth: DepthControl) -> Self {
        MFunctionEvaluator {
            op,
            depth,
            cache: DashMap::new(),
            use_spectral: true,
        }
    }

    /// Ignores any attached spectral measure and always runs the continued fraction.
    pub fn continued_fraction_only(mut self) -> Self {
        self.use_spectral = false;
        self
    }

    pub fn operator(&self) -> &HalfLineOperator {
        &self.op
    }

    /// `1 / m(z)`. Computed directly (without dividing by a small `m`) where possible.
    pub fn reciprocal(&self, z: Complex64) -> Result<Complex64> {
        if let Some(r) = self.cache.get(&key(z)) {
            return Ok(*r);
        }
        let r = self.compute_reciprocal(z)?;
        if self.cache.len() > CACHE_LIMIT {
            self.cache.clear();
        }
        self.cache.insert(key(z), r);
        Ok(r)
    }

    fn compute_reciprocal(&self, z: Complex64) -> Result<Complex64> {
        if self.use_spectral {
            if let Some(s) = self.op.spectral() {
                let m = s.measure.borel(z);
                return Ok(1.0 / m + s.shift);
            }
        }
        if let Some((p, a, b)) = self.op.constant_from() {
            let seed = constant_tail_m(z, a, b);
            return Ok(self.reciprocal_from(z, p, seed));
        }
        let mut n = self.depth.initial.max(1);
        let mut prev = self.reciprocal_from(z, n, Complex64::new(0.0, 0.0));
        loop {
            let next_n = n * self.depth.growth.max(2);
            if next_n > self.depth.max_depth {
                let last = 1.0 / prev;
                return Err(Error::NonConvergence {
                    depth: n,
                    last,
                    previous: last,
                });
            }
            let cur = self.reciprocal_from(z, next_n, Complex64::new(0.0, 0.0));
            let (m_prev, m_cur) = (1.0 / prev, 1.0 / cur);
            if (m_cur - m_prev).norm() < self.depth.tolerance * (1.0 + m_cur.norm()) {
                return Ok(cur);
            }
            if next_n * self.depth.growth.max(2) > self.depth.max_depth {
                return Err(Error::NonConvergence {
                    depth: next_n,
                    last: m_cur,
                    previous: m_prev,
                });
            }
            prev = cur;
            n = next_n;
        }
    }

    /// Runs the recursion from `m^(n) = seed` down to `m^(0)` and returns
    /// `1/m^(0) = b_1 - z - a_1^2 m^(1)`.
    fn reciprocal_from(&self, z: Complex64, n: usize, seed: Complex64) -> Complex64 {
        let mut m = seed;
        for j in (2..=n).rev() {
            let a = self.op.a(j);
            m = 1.0 / (self.op.b(j) - z - a * a * m);
        }
        if n == 0 {
            return 1.0 / m;
        }
        let a = self.op.a(1);
        self.op.b(1) - z - a * a * m
    }

    /// `m(z)` for `Im z > 0`.
    pub fn m(&self, z: Complex64) -> Result<Complex64> {
        if !(z.im > 0.0) {
            return Err(Error::Precondition(format!(
                "m-function needs Im z > 0, got {z}"
            )));
        }
        Ok(1.0 / self.reciprocal(z)?)
    }
}

/// `m(z)` of a half-line operator.
pub fn m_function(evaluator: &MFunctionEvaluator, z: Complex64) -> Result<Complex64> {
    evaluator.m(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{HalfLineData, Tail};

    fn closed_free(z: Complex64) -> Complex64 {
        // Herglotz branch of (-z + sqrt(z^2 - 4)) / 2
        let s = (z * z - 4.0).sqrt();
        let r1 = (-z + s) / 2.0;
        let r2 = (-z - s) / 2.0;
        if r1.im > 0.0 {
            r1
        } else {
            r2
        }
    }

    #[test]
    fn free_at_i() {
        let ev = MFunctionEvaluator::new(HalfLineOperator::free());
        let m = ev.m(Complex64::new(0.0, 1.0)).unwrap();
        assert!((m - Complex64::new(0.0, (5f64.sqrt() - 1.0) / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn free_off_spectrum() {
        let ev = MFunctionEvaluator::new(HalfLineOperator::free());
        let m = ev.m(Complex64::new(3.0, 1e-6)).unwrap();
        assert!((m.re - (5f64.sqrt() - 3.0) / 2.0).abs() < 1e-6);
        assert!(m.im > 0.0 && m.im < 1e-6);
    }

    #[test]
    fn periodic_path_agrees_with_constant_path() {
        let periodic = HalfLineOperator::new(
            0.0,
            HalfLineData::new(
                vec![],
                vec![],
                Tail::Periodic {
                    a: vec![1.0, 1.0],
                    b: vec![0.0],
                },
            ),
        );
        let ev = MFunctionEvaluator::new(periodic);
        for z in [
            Complex64::new(0.3, 0.5),
            Complex64::new(-1.0, 0.05),
            Complex64::new(2.5, 0.01),
        ] {
            assert!((ev.m(z).unwrap() - closed_free(z)).norm() < 1e-10);
        }
    }

    #[test]
    fn rank_one_shift_at_origin() {
        // J_theta = J - tan(theta) <d1,.> d1 has 1/m_theta = 1/m - tan(theta)
        let theta: f64 = 0.7;
        let base =
            HalfLineOperator::from_prefix(&[0.3, -0.2], &[0.9], Tail::Constant { a: 1.0, b: 0.1 });
        let mut shifted = base.clone();
        shifted.origin_b -= theta.tan();
        let (e0, e1) = (
            MFunctionEvaluator::new(base),
            MFunctionEvaluator::new(shifted),
        );
        for z in [Complex64::new(0.1, 0.2), Complex64::new(-1.5, 1.0)] {
            let lhs = e1.reciprocal(z).unwrap();
            let rhs = e0.reciprocal(z).unwrap() - theta.tan();
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn real_axis_rejected() {
        let ev = MFunctionEvaluator::new(HalfLineOperator::free());
        assert!(ev.m(Complex64::new(0.0, 0.0)).is_err());
    }
}
