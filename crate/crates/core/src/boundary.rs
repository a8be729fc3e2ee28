//! Limits `F(E + i0)` read off a geometric ladder `F(E + i eps_j)`.
//!
//! The ladder first runs a divergence test (slope of `ln |F|` against `ln(1/eps)` over the
//! smallest rungs); otherwise the tail of the sequence is accelerated by iterated Aitken
//! extrapolation, applied to the real and imaginary parts separately. Neither the rate of
//! convergence nor the growth exponent is known a priori; the thresholds below are
//! heuristics and are reported as such.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decreasing geometric sequence of imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsLadder {
    pub eps: Vec<f64>,
}

impl Default for EpsLadder {
    /// `eps_j = 2^-j`, `j = 3..=30`.
    fn default() -> Self {
        Self::powers_of_two(3, 30)
    }
}

impl EpsLadder {
    pub fn powers_of_two(j_min: i32, j_max: i32) -> Self {
        EpsLadder {
            eps: (j_min..=j_max).map(|j| 2f64.powi(-j)).collect(),
        }
    }

    /// `count` rungs from `eps_max` down to `eps_min`.
    pub fn geometric(eps_max: f64, eps_min: f64, count: usize) -> Result<Self> {
        if !(eps_max > eps_min && eps_min > 0.0 && count >= 2) {
            return Err(Error::Precondition(format!(
                "bad ladder: {eps_max} .. {eps_min} x {count}"
            )));
        }
        let r = (eps_min / eps_max).powf(1.0 / (count as f64 - 1.0));
        Ok(EpsLadder {
            eps: (0..count).map(|j| eps_max * r.powi(j as i32)).collect(),
        })
    }

    /// Keeps the rungs at or above `eps_min`.
    pub fn floor(&self, eps_min: f64) -> Self {
        EpsLadder {
            eps: self
                .eps
                .iter()
                .copied()
                .filter(|&e| e >= eps_min * (1.0 - 1e-12))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.len() < MIN_RUNGS {
            return Err(Error::Precondition(format!(
                "ladder needs at least {MIN_RUNGS} rungs"
            )));
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) || self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Precondition(
                "ladder must be positive and strictly decreasing".into(),
            ));
        }
        let r0 = self.eps[1] / self.eps[0];
        if self
            .eps
            .windows(2)
            .any(|w| ((w[1] / w[0]) / r0 - 1.0).abs() > 1e-9)
        {
            return Err(Error::Precondition("ladder must be geometric".into()));
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        *self.eps.last().expect("nonempty ladder")
    }
}

pub const MIN_RUNGS: usize = 10;

/// Rungs used by the divergence fit.
pub const FIT_RUNGS: usize = 8;

/// `ln |F|` growing faster than `eps^-DIVERGENCE_SLOPE` counts as divergence. A
/// square-root density singularity grows exactly like `eps^-1/2`, so the cut sits below
/// one half.
pub const DIVERGENCE_SLOPE: f64 = 0.35;

/// Relative error above which an extrapolated limit is not trusted.
pub const CONCLUSIVE_TOLERANCE: f64 = 1e-6;

/// Absolute size below which an imaginary part counts as zero (relative to `1 + |F|`).
pub const ZERO_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Limit {
    Finite {
        value: Complex64,
        error: f64,
    },
    /// `|F(E + i eps)| ~ eps^-exponent`.
    Divergent {
        exponent: f64,
    },
    Inconclusive {
        reason: String,
    },
}

impl Limit {
    pub fn value(&self) -> Option<Complex64> {
        match self {
            Limit::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, Limit::Divergent { .. })
    }

    pub fn is_conclusive(&self) -> bool {
        !matches!(self, Limit::Inconclusive { .. })
    }

    /// Whether a finite limit is real within its error.
    pub fn is_real(&self) -> bool {
        match self {
            Limit::Finite { value, error } => {
                value.im.abs() <= ZERO_TOLERANCE * (1.0 + value.norm()) + 3.0 * error
            }
            _ => false,
        }
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
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

/// Growth exponent of `|F|` in `1/eps` over the last `FIT_RUNGS` rungs.
pub fn growth_exponent(eps: &[f64], values: &[Complex64]) -> f64 {
    let k = eps.len().min(FIT_RUNGS);
    let from = eps.len() - k;
    let xs: Vec<f64> = eps[from..].iter().map(|e| -e.ln()).collect();
    let ys: Vec<f64> = values[from..]
        .iter()
        .map(|v| v.norm().max(1e-300).ln())
        .collect();
    slope(&xs, &ys)
}

/// One Aitken pass: `s_j - (Δs_j)^2 / Δ²s_j`; stalled differences pass through.
fn aitken(s: &[f64]) -> Vec<f64> {
    s.windows(3)
        .map(|w| {
            let d1 = w[1] - w[0];
            let d2 = w[2] - w[1];
            let dd = d2 - d1;
            let scale = w[2].abs().max(1e-300);
            if d2.abs() <= 4.0 * f64::EPSILON * scale || dd.abs() <= 1e-300 {
                w[2]
            } else if (d2 / dd).abs() > 1e6 {
                // no visible geometric rate
                w[2]
            } else {
                w[2] - d2 * d2 / dd
            }
        })
        .collect()
}

/// Limit of a real sequence: iterated Aitken on the last rungs, error from the spread of
/// the final extrapolants.
fn extrapolate(s: &[f64]) -> (f64, f64) {
    let n = s.len().min(9);
    let tail = &s[s.len() - n..];
    let last = *tail.last().unwrap();
    let spread = tail[tail.len() - 3..]
        .iter()
        .map(|v| (v - last).abs())
        .fold(0.0f64, f64::max);
    if spread <= 1e-13 * (1.0 + last.abs()) {
        return (last, spread);
    }
    let mut level = tail.to_vec();
    let mut best = (last, (tail[tail.len() - 1] - tail[tail.len() - 2]).abs());
    while level.len() >= 3 {
        let next = aitken(&level);
        let k = next.len();
        let err = if k >= 2 {
            (next[k - 1] - next[k - 2]).abs()
        } else {
            best.1
        };
        if err < best.1 {
            best = (next[k - 1], err);
        }
        level = next;
    }
    best
}

/// Reads `F(E + i0)` from samples `values[j] = F(E + i eps[j])`.
pub fn analyze(eps: &[f64], values: &[Complex64]) -> Limit {
    if eps.len() != values.len() || eps.len() < 3 {
        return Limit::Inconclusive {
            reason: "too few rungs".into(),
        };
    }
    if values
        .iter()
        .any(|v| !(v.re.is_finite() && v.im.is_finite()))
    {
        return Limit::Inconclusive {
            reason: "non-finite sample".into(),
        };
    }
    let exponent = growth_exponent(eps, values);
    let k = eps.len().min(FIT_RUNGS);
    let norms: Vec<f64> = values[eps.len() - k..].iter().map(|v| v.norm()).collect();
    let rising = norms.windows(2).all(|w| w[1] >= w[0]);
    if exponent > DIVERGENCE_SLOPE && rising {
        return Limit::Divergent { exponent };
    }
    let re: Vec<f64> = values.iter().map(|v| v.re).collect();
    let im: Vec<f64> = values.iter().map(|v| v.im).collect();
    let (vr, er) = extrapolate(&re);
    let (vi, ei) = extrapolate(&im);
    let value = Complex64::new(vr, vi);
    let error = er.hypot(ei);
    if error > CONCLUSIVE_TOLERANCE * (1.0 + value.norm()) {
        return Limit::Inconclusive {
            reason: format!("extrapolation error {error:.2e} at value {value}"),
        };
    }
    Limit::Finite { value, error }
}

/// Samples `f` along the ladder at height `E` and analyzes the result.
pub fn boundary_limit<F>(ladder: &EpsLadder, energy: f64, f: F) -> Result<(Limit, Vec<Complex64>)>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let values = ladder
        .eps
        .iter()
        .map(|&e| f(Complex64::new(energy, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok((analyze(&ladder.eps, &values), values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(f: impl Fn(f64) -> Complex64) -> (Vec<f64>, Vec<Complex64>) {
        let l = EpsLadder::default();
        let v = l.eps.iter().map(|&e| f(e)).collect();
        (l.eps, v)
    }

    #[test]
    fn smooth_limit() {
        let (e, v) = sample(|e| Complex64::new(1.0 + 3.0 * e, 0.5 - e * e));
        let l = analyze(&e, &v);
        let x = l.value().unwrap();
        assert!((x - Complex64::new(1.0, 0.5)).norm() < 1e-12);
        assert!(!l.is_real());
    }

    #[test]
    fn square_root_approach() {
        let (e, v) = sample(|e| Complex64::new(2.0 + e.sqrt(), 0.0));
        let x = analyze(&e, &v).value().unwrap();
        assert!((x.re - 2.0).abs() < 1e-9);
    }

    #[test]
    fn pole_and_root_singularity() {
        let (e, v) = sample(|e| Complex64::new(0.0, 0.5 / e));
        assert!(
            matches!(analyze(&e, &v), Limit::Divergent { exponent } if (exponent - 1.0).abs() < 1e-9)
        );
        let (e, v) = sample(|e| Complex64::new(0.3, 1.0 / e.sqrt()));
        assert!(analyze(&e, &v).is_divergent());
    }

    #[test]
    fn vanishing_imaginary_part_is_real() {
        let (e, v) = sample(|e| Complex64::new(-0.4, 7.0 * e));
        let l = analyze(&e, &v);
        assert!(l.is_real());
    }

    #[test]
    fn slow_logarithm_is_inconclusive() {
        let (e, v) = sample(|e| Complex64::new(1.0 / (-e.ln()), 0.0));
        assert!(!analyze(&e, &v).is_conclusive());
    }

    #[test]
    fn ladder_checks() {
        assert!(EpsLadder::default().validate().is_ok());
        assert_eq!(EpsLadder::default().eps.len(), 28);
        let bad = EpsLadder {
            eps: vec![1.0, 0.5, 0.3, 0.1, 0.05, 0.01, 0.005, 0.001, 5e-4, 1e-4],
        };
        assert!(bad.validate().is_err());
    }
}
