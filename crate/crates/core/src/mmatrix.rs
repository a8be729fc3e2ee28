//! The compact-block resolvent `M(z) = P_C (J - z)^{-1} P_C`.
//!
//! With `A` the compact adjacency (edge weights only, zero diagonal) and `m_k` the
//! m-function of the slice at `v_k`,
//!
//! ```text
//! M(z)^{-1} = A + diag(1/m_1(z), ..., 1/m_n(z))
//! ```
//!
//! A slice is the half-line hanging off `v_k` with `v_k` itself as origin; a compact
//! vertex without a half-line has `m_k(z) = 1/(b_k - z)`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::boundary::{analyze, EpsLadder, Limit};
use crate::error::{Error, Result};
use crate::graph::{compact_adjacency, validate, JacobiCoefficients, StarLikeGraph};
use crate::linalg::{singular_values, BandedSymmetric};
use crate::mfunction::MFunctionEvaluator;

/// `K(z)` counts as singular above this condition number.
pub const CONDITION_LIMIT: f64 = 1e14;

#[derive(Clone)]
pub enum HalfLineSlice {
    HalfLine {
        root: String,
        evaluator: Arc<MFunctionEvaluator>,
    },
    Singleton {
        root: String,
        b: f64,
    },
}

impl HalfLineSlice {
    pub fn root(&self) -> &str {
        match self {
            HalfLineSlice::HalfLine { root, .. } | HalfLineSlice::Singleton { root, .. } => root,
        }
    }

    pub fn is_singleton(&self) -> bool {
        matches!(self, HalfLineSlice::Singleton { .. })
    }

    /// `1/m_k(z)`.
    pub fn reciprocal(&self, z: Complex64) -> Result<Complex64> {
        if !(z.im > 0.0) {
            return Err(Error::Precondition(format!(
                "slice m-function needs Im z > 0, got {z}"
            )));
        }
        match self {
            HalfLineSlice::HalfLine { evaluator, .. } => evaluator.reciprocal(z),
            HalfLineSlice::Singleton { b, .. } => Ok(*b - z),
        }
    }

    pub fn evaluator(&self) -> Option<&MFunctionEvaluator> {
        match self {
            HalfLineSlice::HalfLine { evaluator, .. } => Some(evaluator),
            HalfLineSlice::Singleton { .. } => None,
        }
    }
}

/// `m_k(z)` for `Im z > 0`.
pub fn m_k(slice: &HalfLineSlice, z: Complex64) -> Result<Complex64> {
    Ok(1.0 / slice.reciprocal(z)?)
}

#[derive(Clone, Debug)]
pub struct MMatrix {
    pub z: Complex64,
    pub entries: DMatrix<Complex64>,
    /// Compact vertex names, in the graph's order.
    pub order: Vec<String>,
}

impl MMatrix {
    pub fn symmetry_defect(&self) -> f64 {
        let m = &self.entries;
        (m - m.transpose())
            .iter()
            .fold(0.0f64, |a, x| a.max(x.norm()))
    }

    /// `(M - M*) / 2i`, Hermitian.
    pub fn imaginary_part(&self) -> DMatrix<Complex64> {
        let m = &self.entries;
        (m - m.adjoint()) / Complex64::new(0.0, 2.0)
    }

    pub fn min_imaginary_eigenvalue(&self) -> f64 {
        let h = self.imaginary_part();
        let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(h)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn im_trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|x| x.im).sum()
    }
}

/// Slices plus adjacency of one graph, built once and reused across `z`.
#[derive(Clone)]
pub struct CompactModel {
    pub graph: StarLikeGraph,
    pub coeffs: JacobiCoefficients,
    adjacency: DMatrix<f64>,
    slices: Vec<HalfLineSlice>,
}

impl CompactModel {
    pub fn new(graph: &StarLikeGraph, coeffs: &JacobiCoefficients) -> Result<Self> {
        validate(graph, coeffs).into_result()?;
        let slices = graph
            .compact
            .iter()
            .map(
                |v| match coeffs.slice(v).filter(|_| graph.has_halfline(v)) {
                    Some(op) => HalfLineSlice::HalfLine {
                        root: v.clone(),
                        evaluator: Arc::new(MFunctionEvaluator::new(op)),
                    },
                    None => HalfLineSlice::Singleton {
                        root: v.clone(),
                        b: coeffs.b_of(v),
                    },
                },
            )
            .collect();
        Ok(CompactModel {
            graph: graph.clone(),
            coeffs: coeffs.clone(),
            adjacency: compact_adjacency(graph, coeffs),
            slices,
        })
    }

    pub fn n(&self) -> usize {
        self.slices.len()
    }

    pub fn slices(&self) -> &[HalfLineSlice] {
        &self.slices
    }

    pub fn slice(&self, k: usize) -> &HalfLineSlice {
        &self.slices[k]
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    /// `K(z) = A + diag(1/m_k(z))`.
    pub fn k_matrix(&self, z: Complex64) -> Result<DMatrix<Complex64>> {
        let mut k = self.adjacency.map(|x| Complex64::new(x, 0.0));
        for (i, s) in self.slices.iter().enumerate() {
            k[(i, i)] += s.reciprocal(z)?;
        }
        Ok(k)
    }

    pub fn assemble(&self, z: Complex64) -> Result<MMatrix> {
        let k = self.k_matrix(z)?;
        let sv = singular_values(&k);
        let condition = match (sv.first(), sv.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        };
        if !(condition <= CONDITION_LIMIT) {
            return Err(Error::SingularK { condition });
        }
        let entries = k.lu().try_inverse().ok_or(Error::SingularK { condition })?;
        Ok(MMatrix {
            z,
            entries,
            order: self.graph.compact.clone(),
        })
    }

    /// `M(E + i eps)` down the ladder, with per-entry limits and the limit of `Im tr M`.
    pub fn boundary_value(&self, energy: f64, ladder: &EpsLadder) -> Result<BoundaryValue> {
        ladder.validate()?;
        let samples = ladder
            .eps
            .iter()
            .map(|&e| self.assemble(Complex64::new(energy, e)).map(|m| m.entries))
            .collect::<Result<Vec<_>>>()?;
        let n = self.n();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let series: Vec<Complex64> = samples.iter().map(|m| m[(i, j)]).collect();
                entries.push(analyze(&ladder.eps, &series));
            }
        }
        let trace: Vec<Complex64> = samples
            .iter()
            .map(|m| Complex64::new(m.diagonal().iter().map(|x| x.im).sum(), 0.0))
            .collect();
        let im_trace = analyze(&ladder.eps, &trace);
        Ok(BoundaryValue {
            energy,
            eps: ladder.eps.clone(),
            samples,
            n,
            entries,
            im_trace,
        })
    }
}

/// Ladder data and limits for `M(E + i0)`.
#[derive(Clone, Debug)]
pub struct BoundaryValue {
    pub energy: f64,
    pub eps: Vec<f64>,
    pub samples: Vec<DMatrix<Complex64>>,
    n: usize,
    entries: Vec<Limit>,
    pub im_trace: Limit,
}

impl BoundaryValue {
    pub fn entry(&self, i: usize, j: usize) -> &Limit {
        &self.entries[i * self.n + j]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn divergent_entries(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.entry(i, j).is_divergent())
            .collect()
    }
}

pub fn assemble(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    z: Complex64,
) -> Result<MMatrix> {
    CompactModel::new(graph, coeffs)?.assemble(z)
}

pub fn boundary_value(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    energy: f64,
    ladder: &EpsLadder,
) -> Result<BoundaryValue> {
    CompactModel::new(graph, coeffs)?.boundary_value(energy, ladder)
}

/// Depth control for [`direct_oracle`].
#[derive(Clone, Copy, Debug)]
pub struct OracleDepth {
    pub initial: usize,
    pub max: usize,
    pub tolerance: f64,
}

impl Default for OracleDepth {
    fn default() -> Self {
        OracleDepth {
            initial: 64,
            max: 1 << 20,
            tolerance: 1e-11,
        }
    }
}

/// Compact block of `(J_N - z)^{-1}` for the finite section keeping `depth` sites per
/// half-line. Sites are ordered by depth across half-lines so the section is banded.
pub fn finite_section_block(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    z: Complex64,
    depth: usize,
) -> DMatrix<Complex64> {
    let n = graph.n();
    let k = graph.k();
    let size = n + k * depth;
    let w = (n + k).saturating_sub(1).max(1);
    let site = |root_idx: usize, d: usize| n + (d - 1) * k + root_idx;
    let mut m = BandedSymmetric::zeros(size, w);
    for (i, v) in graph.compact.iter().enumerate() {
        m.add(i, i, Complex64::new(coeffs.b_of(v), 0.0) - z);
    }
    for (u, v) in &graph.edges {
        if let (Some(i), Some(j)) = (graph.index_of(u), graph.index_of(v)) {
            m.add(i, j, Complex64::new(coeffs.a_of(u, v), 0.0));
        }
    }
    for (ri, r) in graph.roots.iter().enumerate() {
        let h = &coeffs.halflines[r];
        let root = graph.index_of(r).expect("validated root");
        if depth > 0 {
            m.add(site(ri, 1), root, Complex64::new(h.a_at(0), 0.0));
        }
        for d in 1..=depth {
            m.add(site(ri, d), site(ri, d), Complex64::new(h.b_at(d), 0.0) - z);
            if d < depth {
                m.add(site(ri, d + 1), site(ri, d), Complex64::new(h.a_at(d), 0.0));
            }
        }
    }
    m.factor();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut rhs = vec![Complex64::new(0.0, 0.0); size];
        rhs[j] = Complex64::new(1.0, 0.0);
        m.solve(&mut rhs);
        for i in 0..n {
            out[(i, j)] = rhs[i];
        }
    }
    out
}

/// Brute-force `M(z)` from finite sections, doubling the depth (starting at `depth`)
/// until two sections agree.
pub fn direct_oracle(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    z: Complex64,
    depth: usize,
) -> Result<DMatrix<Complex64>> {
    direct_oracle_with(
        graph,
        coeffs,
        z,
        OracleDepth {
            initial: depth.max(1),
            ..Default::default()
        },
    )
}

pub fn direct_oracle_with(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    z: Complex64,
    control: OracleDepth,
) -> Result<DMatrix<Complex64>> {
    validate(graph, coeffs).into_result()?;
    if graph.k() == 0 {
        return Err(Error::Precondition(
            "direct oracle needs at least one half-line".into(),
        ));
    }
    if !(z.im >= 0.05) {
        return Err(Error::Precondition(format!(
            "direct oracle needs Im z >= 0.05, got {z}"
        )));
    }
    let mut depth = control.initial;
    let mut prev = finite_section_block(graph, coeffs, z, depth);
    loop {
        let next_depth = depth * 2;
        if next_depth > control.max {
            return Err(Error::OracleNonConvergence {
                depth,
                change: f64::NAN,
            });
        }
        let cur = finite_section_block(graph, coeffs, z, next_depth);
        let change = (&cur - &prev).iter().fold(0.0f64, |a, x| a.max(x.norm()));
        let scale = cur.iter().fold(1.0f64, |a, x| a.max(x.norm()));
        if change <= control.tolerance * scale {
            return Ok(cur);
        }
        if next_depth * 2 > control.max {
            return Err(Error::OracleNonConvergence {
                depth: next_depth,
                change,
            });
        }
        prev = cur;
        depth = next_depth;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::shapes;

    fn golden() -> Complex64 {
        Complex64::new(0.0, (5f64.sqrt() - 1.0) / 2.0)
    }

    #[test]
    fn singleton_slice() {
        let s = HalfLineSlice::Singleton {
            root: "v".into(),
            b: 0.0,
        };
        assert!(
            (m_k(&s, Complex64::new(0.0, 1.0)).unwrap() - Complex64::new(0.0, 1.0)).norm() < 1e-15
        );
    }

    #[test]
    fn half_line_graph() {
        let (g, c) = shapes::half_line();
        let m = assemble(&g, &c, Complex64::new(0.0, 1.0)).unwrap();
        assert!((m.entries[(0, 0)] - golden()).norm() < 1e-12);
        let d = direct_oracle(&g, &c, Complex64::new(0.0, 1.0), 2000).unwrap();
        assert!((d[(0, 0)] - golden()).norm() < 1e-8);
    }

    #[test]
    fn line_graph_two_by_two() {
        let (g, c) = shapes::line();
        let z = Complex64::new(0.0, 1.0);
        let m = assemble(&g, &c, z).unwrap();
        let r = 1.0 / golden();
        let det = r * r - 1.0;
        assert!((m.entries[(0, 0)] - r / det).norm() < 1e-12);
        assert!((m.entries[(0, 1)] + 1.0 / det).norm() < 1e-12);
        let d = direct_oracle(&g, &c, z, 64).unwrap();
        assert!((&m.entries - d).iter().all(|x| x.norm() < 1e-8));
    }

    #[test]
    fn triangle_herglotz_and_oracle() {
        let (g, c) = shapes::triangle();
        let m = assemble(&g, &c, Complex64::new(0.3, 0.01)).unwrap();
        assert!(m.min_imaginary_eigenvalue() >= -1e-12);
        assert!(m.symmetry_defect() < 1e-12);
        let z = Complex64::new(0.0, 2.0);
        let m = assemble(&g, &c, z).unwrap();
        let d = direct_oracle(&g, &c, z, 64).unwrap();
        assert!((&m.entries - d).iter().all(|x| x.norm() < 1e-8));
    }

    #[test]
    fn oracle_rejects_small_imaginary_part() {
        let (g, c) = shapes::half_line();
        assert!(direct_oracle(&g, &c, Complex64::new(0.0, 0.01), 64).is_err());
    }

    #[test]
    fn free_boundary_values() {
        let (g, c) = shapes::half_line();
        let l = EpsLadder::default();
        let bv = boundary_value(&g, &c, 0.0, &l).unwrap();
        let v = bv.entry(0, 0).value().unwrap();
        assert!((v - Complex64::new(0.0, 1.0)).norm() < 1e-6);
        let bv = boundary_value(&g, &c, 3.0, &l).unwrap();
        let v = bv.entry(0, 0).value().unwrap();
        assert!((v.re - (5f64.sqrt() - 3.0) / 2.0).abs() < 1e-6);
        assert!(bv.entry(0, 0).is_real());
    }
}
