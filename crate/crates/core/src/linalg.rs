//! Small dense and banded helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Singular values of a complex matrix, descending.
pub fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn singular_values_real(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Number of singular values above `threshold * sigma_max`.
pub fn numerical_rank(sv: &[f64], threshold: f64) -> usize {
    let top = sv.iter().copied().fold(0.0f64, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > threshold * top).count()
}

pub fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Orthonormal basis of the (numerical) null space of a real matrix, plus the singular
/// values (descending, padded with zeros to the column count).
pub fn null_space(m: &DMatrix<f64>, threshold: f64) -> (Vec<DVector<f64>>, Vec<f64>) {
    let n = m.ncols();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    // pad with zero rows so the thin SVD returns a full right basis
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let top = sv.iter().copied().fold(0.0f64, f64::max);
    let mut basis = Vec::new();
    for (i, &s) in sv.iter().enumerate() {
        if top == 0.0 || s <= threshold * top {
            basis.push(vt.row(i).transpose().into_owned());
        }
    }
    let mut sorted = sv;
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (basis, sorted)
}

/// Complex symmetric banded matrix factored as `L D L^T` without pivoting.
///
/// Meant for `H - z` with `H` real symmetric and `Im z > 0`: every Schur complement then
/// has imaginary part `<= -Im z`, so pivots stay at least `Im z` in modulus.
pub struct BandedSymmetric {
    n: usize,
    w: usize,
    // band[i][k] = entry (i, i - w + k) for k in 0..=w (lower triangle incl. diagonal)
    band: Vec<Vec<Complex64>>,
}

impl BandedSymmetric {
    pub fn zeros(n: usize, w: usize) -> Self {
        BandedSymmetric {
            n,
            w,
            band: vec![vec![Complex64::new(0.0, 0.0); w + 1]; n],
        }
    }

    /// Adds `x` at `(i, j)` (and implicitly `(j, i)`); requires `|i - j| <= w`.
    pub fn add(&mut self, i: usize, j: usize, x: Complex64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.w, "entry outside band");
        self.band[i][self.w + j - i] += x;
    }

    fn get(&self, i: usize, j: usize) -> Complex64 {
        self.band[i][self.w + j - i]
    }

    /// In-place factorization; returns the smallest pivot modulus.
    pub fn factor(&mut self) -> f64 {
        let w = self.w;
        let mut min_pivot = f64::INFINITY;
        for j in 0..self.n {
            // d_j = a_jj - sum_k l_jk^2 d_k
            let lo = j.saturating_sub(w);
            let mut d = self.get(j, j);
            for k in lo..j {
                let l = self.get(j, k);
                d -= l * l * self.get(k, k);
            }
            self.band[j][w] = d;
            min_pivot = min_pivot.min(d.norm());
            for i in j + 1..(j + w + 1).min(self.n) {
                let lo_i = i.saturating_sub(w).max(lo);
                let mut s = self.get(i, j);
                for k in lo_i..j {
                    s -= self.get(i, k) * self.get(j, k) * self.get(k, k);
                }
                self.band[i][w + j - i] = s / d;
            }
        }
        min_pivot
    }

    /// Solves with the factored matrix.
    pub fn solve(&self, rhs: &mut [Complex64]) {
        let w = self.w;
        for i in 0..self.n {
            let lo = i.saturating_sub(w);
            let mut s = rhs[i];
            for k in lo..i {
                s -= self.get(i, k) * rhs[k];
            }
            rhs[i] = s;
        }
        for i in 0..self.n {
            rhs[i] /= self.get(i, i);
        }
        for i in (0..self.n).rev() {
            let mut s = rhs[i];
            for k in i + 1..(i + w + 1).min(self.n) {
                s -= self.get(k, i) * rhs[k];
            }
            rhs[i] = s;
        }
    }
}

/// Eigenvalues of a real symmetric tridiagonal matrix in `[lo, hi]` by Sturm bisection.
pub fn tridiagonal_eigenvalues_in(d: &[f64], e: &[f64], lo: f64, hi: f64, tol: f64) -> Vec<f64> {
    let count = |x: f64| -> usize {
        // number of eigenvalues < x
        let mut c = 0;
        let mut q = d[0] - x;
        if q < 0.0 {
            c += 1;
        }
        for i in 1..d.len() {
            let qq = if q == 0.0 { f64::EPSILON } else { q };
            q = d[i] - x - e[i - 1] * e[i - 1] / qq;
            if q < 0.0 {
                c += 1;
            }
        }
        c
    };
    let (c_lo, c_hi) = (count(lo), count(hi));
    let mut out = Vec::new();
    for target in c_lo..c_hi {
        // find x with count(x) <= target < count(x + dx)
        let (mut a, mut b) = (lo, hi);
        while b - a > tol {
            let mid = 0.5 * (a + b);
            if count(mid) > target {
                b = mid;
            } else {
                a = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_matches_dense() {
        let n = 30;
        let w = 3;
        let z = Complex64::new(0.3, 0.2);
        let mut b = BandedSymmetric::zeros(n, w);
        let mut dense = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for i in 0..n {
            for j in i.saturating_sub(w)..=i {
                let x = ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0;
                let v = if i == j {
                    Complex64::new(x, 0.0) - z
                } else {
                    Complex64::new(x, 0.0)
                };
                b.add(i, j, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
        }
        b.factor();
        let mut rhs: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let want = dense.lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
        b.solve(&mut rhs);
        for i in 0..n {
            assert!((rhs[i] - want[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let (basis, sv) = null_space(&m, 1e-8);
        assert_eq!(basis.len(), 2);
        assert_eq!(sv.len(), 3);
        for v in &basis {
            assert!((v.sum()).abs() < 1e-12);
        }
    }

    #[test]
    fn sturm_free_chain() {
        let n = 50;
        let d = vec![0.0; n];
        let e = vec![1.0; n - 1];
        let ev = tridiagonal_eigenvalues_in(&d, &e, -3.0, 3.0, 1e-13);
        assert_eq!(ev.len(), n);
        for (j, x) in ev.iter().enumerate() {
            let want = 2.0 * (((n - j) as f64) * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((x - want).abs() < 1e-11);
        }
    }
}
