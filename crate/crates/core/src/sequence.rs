//! Coefficient sequences of a single half-line.
//!
//! A half-line attached at root `u` carries `a_u(i)` for `i >= 0` (with `a_u(0)` the
//! weight of the edge from `u` into the half-line) and `b_u(i)` for `i >= 1`. Both are
//! given as explicit prefixes followed by a tail rule.

use std::sync::Arc;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::measure::MeasureSpec;

/// Deterministic coefficient generators, addressed by `(root key, index)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Generator {
    /// i.i.d. draws: `b` uniform in `[b_min, b_max]`, `|a|` uniform in `[a_min, a_max]`,
    /// with a random sign when `signed` is set.
    Random {
        seed: u64,
        b_min: f64,
        b_max: f64,
        a_min: f64,
        a_max: f64,
        #[serde(default)]
        signed: bool,
    },
    /// `b(i) = 2 coupling cos(2 pi (frequency i + phase))`, `a(i) = 1`.
    AlmostMathieu {
        coupling: f64,
        frequency: f64,
        phase: f64,
    },
}

impl Generator {
    fn draw(seed: u64, key: u64, index: usize) -> (f64, f64, bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(key);
        rng.set_word_pos(index as u128 * 4);
        let unit = |w: u64| (w >> 11) as f64 / (1u64 << 53) as f64;
        let x = rng.next_u64();
        let y = rng.next_u64();
        (unit(x), unit(y), y & 1 == 1)
    }

    pub fn b(&self, key: u64, index: usize) -> f64 {
        match *self {
            Generator::Random {
                seed, b_min, b_max, ..
            } => {
                let (u, _, _) = Self::draw(seed, key, index);
                b_min + (b_max - b_min) * u
            }
            Generator::AlmostMathieu {
                coupling,
                frequency,
                phase,
            } => {
                2.0 * coupling
                    * (2.0 * std::f64::consts::PI * (frequency * index as f64 + phase)).cos()
            }
        }
    }

    pub fn a(&self, key: u64, index: usize) -> f64 {
        match *self {
            Generator::Random {
                seed,
                a_min,
                a_max,
                signed,
                ..
            } => {
                let (_, v, neg) = Self::draw(seed, key, index);
                let mag = a_min + (a_max - a_min) * v;
                if signed && neg {
                    -mag
                } else {
                    mag
                }
            }
            Generator::AlmostMathieu { .. } => 1.0,
        }
    }

    /// Analytic sup of `|b|` and `|a|` over all indices.
    pub fn bound(&self) -> f64 {
        match *self {
            Generator::Random {
                b_min,
                b_max,
                a_min,
                a_max,
                ..
            } => b_min
                .abs()
                .max(b_max.abs())
                .max(a_min.abs())
                .max(a_max.abs()),
            Generator::AlmostMathieu { coupling, .. } => (2.0 * coupling.abs()).max(1.0),
        }
    }

    /// Smallest `|a|` the generator can produce.
    pub fn min_abs_a(&self) -> f64 {
        match *self {
            Generator::Random { a_min, a_max, .. } => a_min.abs().min(a_max.abs()),
            Generator::AlmostMathieu { .. } => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tail {
    Constant {
        a: f64,
        b: f64,
    },
    /// Repeats `a` and `b` from the end of the respective explicit prefix on.
    Periodic {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    Generator(Generator),
}

/// The half-line spectral measure behind a measure-derived branch.
///
/// The slice operator (root as origin) is `J_theta + shift <d1,.> d1`, where `measure`
/// is the spectral measure of `J_theta` at the origin. Its m-function is therefore
/// `1/m = 1/m_mu + shift`.
#[derive(Clone, Debug)]
pub struct SpectralBranch {
    pub measure: Arc<MeasureSpec>,
    pub shift: f64,
    /// Number of recurrence coefficients computed from the measure.
    pub depth: usize,
    /// Diagonal entry at the root implied by the measure and the shift.
    pub origin_b: f64,
}

#[derive(Clone, Debug)]
pub struct HalfLineData {
    /// `a_u(0), a_u(1), ...`
    pub a: Vec<f64>,
    /// `b_u(1), b_u(2), ...`
    pub b: Vec<f64>,
    pub tail: Tail,
    /// Key for generator tails; set from the root name when attached to a graph.
    pub key: u64,
    /// Index shift applied to generator lookups (nonzero after `advance`).
    pub offset: usize,
    pub spectral: Option<SpectralBranch>,
}

impl HalfLineData {
    pub fn new(a: Vec<f64>, b: Vec<f64>, tail: Tail) -> Self {
        HalfLineData {
            a,
            b,
            tail,
            key: 0,
            offset: 0,
            spectral: None,
        }
    }

    pub fn constant(a: f64, b: f64) -> Self {
        Self::new(Vec::new(), Vec::new(), Tail::Constant { a, b })
    }

    pub fn free() -> Self {
        Self::constant(1.0, 0.0)
    }

    /// `a_u(i)`, `i >= 0`.
    pub fn a_at(&self, i: usize) -> f64 {
        if i < self.a.len() {
            return self.a[i];
        }
        match &self.tail {
            Tail::Constant { a, .. } => *a,
            Tail::Periodic { a, .. } => a[(i - self.a.len()) % a.len()],
            Tail::Generator(g) => g.a(self.key, i + self.offset),
        }
    }

    /// `b_u(i)`, `i >= 1`.
    pub fn b_at(&self, i: usize) -> f64 {
        debug_assert!(i >= 1);
        if i <= self.b.len() {
            return self.b[i - 1];
        }
        match &self.tail {
            Tail::Constant { b, .. } => *b,
            Tail::Periodic { b, .. } => b[(i - 1 - self.b.len()) % b.len()],
            Tail::Generator(g) => g.b(self.key, i + self.offset),
        }
    }

    pub fn bound(&self) -> f64 {
        let prefix = self
            .a
            .iter()
            .chain(self.b.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let tail = match &self.tail {
            Tail::Constant { a, b } => a.abs().max(b.abs()),
            Tail::Periodic { a, b } => a.iter().chain(b.iter()).fold(0.0f64, |m, x| m.max(x.abs())),
            Tail::Generator(g) => g.bound(),
        };
        prefix.max(tail)
    }

    /// The half-line seen from its `p`-th site: `a'(i) = a_u(p + i)`, `b'(i) = b_u(p + i)`.
    /// Spectral data does not survive the shift.
    pub fn advance(&self, p: usize) -> HalfLineData {
        let a: Vec<f64> = self.a.iter().skip(p).copied().collect();
        let b: Vec<f64> = self.b.iter().skip(p).copied().collect();
        let tail = match &self.tail {
            Tail::Constant { .. } => self.tail.clone(),
            Tail::Periodic { a: pa, b: pb } => {
                let ra = p.saturating_sub(self.a.len()) % pa.len();
                let rb = p.saturating_sub(self.b.len()) % pb.len();
                let mut pa = pa.clone();
                let mut pb = pb.clone();
                pa.rotate_left(ra);
                pb.rotate_left(rb);
                Tail::Periodic { a: pa, b: pb }
            }
            Tail::Generator(_) => self.tail.clone(),
        };
        HalfLineData {
            a,
            b,
            tail,
            key: self.key,
            offset: self.offset + p,
            spectral: None,
        }
    }
}

/// A Jacobi operator on the half-line `{1, 2, ...}`: diagonal `b(n)` and off-diagonal
/// `a(n)` on the edge `(n, n+1)`.
///
/// As a slice of a star-like graph, site 1 is the root `v_k`, so `b(1)` is the root's
/// diagonal entry and the rest comes from the attached half-line.
#[derive(Clone, Debug)]
pub struct HalfLineOperator {
    pub origin_b: f64,
    pub data: HalfLineData,
}

impl HalfLineOperator {
    pub fn new(origin_b: f64, data: HalfLineData) -> Self {
        HalfLineOperator { origin_b, data }
    }

    pub fn free() -> Self {
        Self::new(0.0, HalfLineData::free())
    }

    /// Builds from `b_1, b_2, ...` and `a_1, a_2, ...` followed by `tail`.
    pub fn from_prefix(b: &[f64], a: &[f64], tail: Tail) -> Self {
        assert!(!b.is_empty(), "need b_1");
        Self::new(b[0], HalfLineData::new(a.to_vec(), b[1..].to_vec(), tail))
    }

    #[inline]
    pub fn b(&self, n: usize) -> f64 {
        if n == 1 {
            self.origin_b
        } else {
            self.data.b_at(n - 1)
        }
    }

    #[inline]
    pub fn a(&self, n: usize) -> f64 {
        self.data.a_at(n - 1)
    }

    /// `Some((p, a, b))` when `a(n) = a` and `b(n) = b` for every `n > p`.
    pub fn constant_from(&self) -> Option<(usize, f64, f64)> {
        let (a, b) = match &self.data.tail {
            Tail::Constant { a, b } => (*a, *b),
            Tail::Periodic { a, b } if a.len() == 1 && b.len() == 1 => (a[0], b[0]),
            _ => return None,
        };
        Some(((1 + self.data.b.len()).max(self.data.a.len()), a, b))
    }

    pub fn spectral(&self) -> Option<&SpectralBranch> {
        self.data.spectral.as_ref()
    }

    pub fn bound(&self) -> f64 {
        self.origin_b.abs().max(self.data.bound())
    }

    /// Diagonal and off-diagonal of the `n x n` truncation.
    pub fn truncation(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let d = (1..=n).map(|j| self.b(j)).collect();
        let o = (1..n).map(|j| self.a(j)).collect();
        (d, o)
    }
}

/// FNV-1a, used to key generator streams by root name.
pub fn root_key(name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for byte in name.bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
