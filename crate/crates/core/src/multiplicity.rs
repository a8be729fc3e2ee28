//! Multiplicity bounds at singular energies.
//!
//! Two numbers bracket the multiplicity `N_J(E)` of the singular part:
//!
//! * the rank of `omega(E)`, the matrix of boundary ratios `M_lj / M_kk` for a pivot `k`
//!   whose diagonal entry carries the singular mass. The positive factor that turns the
//!   ratios into a density of spectral measures does not change the rank and is never
//!   estimated;
//! * the dimension of the space of global solutions subordinate on every half-line.
//!
//! When no solution in that space is square summable, the number of half-lines caps the
//! bound as well.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boundary::{analyze, EpsLadder, Limit};
use crate::classification::{
    classify_model, constraint_matrix, continue_seed, extend_compact_solution, ClassifyConfig,
    CompactSolutionCandidate, EnergyClassification, RowKind, SliceStatus,
};
use crate::error::{Error, Result};
use crate::graph::{JacobiCoefficients, StarLikeGraph};
use crate::halfline::{l2_evidence, BoundaryCondition, L2Evidence};
use crate::linalg::{null_space, singular_values_real};
use crate::mmatrix::{CompactModel, HalfLineSlice};

/// Relative singular-value cut for the rank of `omega`. Ratio limits come out of an
/// extrapolation, so the cut sits well above rounding.
pub const OMEGA_RANK_THRESHOLD: f64 = 1e-6;

/// Diagonal entries this far below the largest one are not used as pivots.
pub const PIVOT_FLOOR: f64 = 1e-3;

/// Number of singular values above `threshold * sigma_max`.
pub fn rank_of(m: &DMatrix<f64>, threshold: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    crate::linalg::numerical_rank(&singular_values_real(m), threshold)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmegaMatrix {
    pub energy: f64,
    pub pivot: usize,
    /// Real parts of the ratio limits, row-major.
    pub entries: Vec<Vec<f64>>,
    /// Largest imaginary part among the limits.
    pub max_imaginary: f64,
    /// Entries whose ratio did not settle.
    pub flagged: Vec<(usize, usize)>,
    /// Ladder value of `|M_kk|` at the smallest epsilon, per diagonal entry.
    pub diagonal: Vec<f64>,
}

impl OmegaMatrix {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.entries.len();
        DMatrix::from_fn(n, n, |i, j| self.entries[i][j])
    }

    /// Rank, or `None` when an entry is flagged.
    pub fn rank(&self, threshold: f64) -> Option<usize> {
        if self.flagged.is_empty() {
            Some(rank_of(&self.matrix(), threshold))
        } else {
            None
        }
    }

    /// Indices whose diagonal entry is within `PIVOT_FLOOR` of the largest.
    pub fn valid_pivots(&self) -> Vec<usize> {
        let top = self.diagonal.iter().copied().fold(0.0f64, f64::max);
        (0..self.diagonal.len())
            .filter(|&i| self.diagonal[i] >= PIVOT_FLOOR * top)
            .collect()
    }
}

fn ladder_samples(
    model: &CompactModel,
    energy: f64,
    ladder: &EpsLadder,
) -> Result<Vec<DMatrix<Complex64>>> {
    ladder.validate()?;
    ladder
        .eps
        .iter()
        .map(|&e| model.assemble(Complex64::new(energy, e)).map(|m| m.entries))
        .collect()
}

fn diagonal_at_min(samples: &[DMatrix<Complex64>]) -> Result<Vec<f64>> {
    let last = samples.last().ok_or(Error::NoPivot)?;
    let diag: Vec<f64> = last.diagonal().iter().map(|x| x.norm()).collect();
    let scale = last.iter().fold(0.0f64, |a, x| a.max(x.norm()));
    if diag.iter().all(|&d| d <= 1e-14 * scale) {
        return Err(Error::NoPivot);
    }
    Ok(diag)
}

fn ratios(
    energy: f64,
    eps: &[f64],
    samples: &[DMatrix<Complex64>],
    pivot: usize,
    diagonal: Vec<f64>,
) -> OmegaMatrix {
    let n = samples[0].nrows();
    let mut entries = vec![vec![0.0; n]; n];
    let mut flagged = Vec::new();
    let mut max_imaginary = 0.0f64;
    for l in 0..n {
        for j in 0..n {
            let series: Vec<Complex64> = samples
                .iter()
                .map(|m| m[(l, j)] / m[(pivot, pivot)])
                .collect();
            match analyze(eps, &series) {
                Limit::Finite { value, .. } => {
                    entries[l][j] = value.re;
                    max_imaginary = max_imaginary.max(value.im.abs());
                }
                _ => flagged.push((l, j)),
            }
        }
    }
    OmegaMatrix {
        energy,
        pivot,
        entries,
        max_imaginary,
        flagged,
        diagonal,
    }
}

/// `omega(E)` with the pivot maximizing `|M_kk(E + i eps_min)|`.
pub fn omega_matrix(model: &CompactModel, energy: f64, ladder: &EpsLadder) -> Result<OmegaMatrix> {
    let samples = ladder_samples(model, energy, ladder)?;
    let diag = diagonal_at_min(&samples)?;
    let pivot = (0..diag.len())
        .max_by(|&a, &b| diag[a].partial_cmp(&diag[b]).unwrap())
        .unwrap();
    Ok(ratios(energy, &ladder.eps, &samples, pivot, diag))
}

/// `omega(E)` for a chosen pivot.
pub fn omega_matrix_with_pivot(
    model: &CompactModel,
    energy: f64,
    ladder: &EpsLadder,
    pivot: usize,
) -> Result<OmegaMatrix> {
    if pivot >= model.n() {
        return Err(Error::Precondition(format!("pivot {pivot} out of range")));
    }
    let samples = ladder_samples(model, energy, ladder)?;
    let diag = diagonal_at_min(&samples)?;
    Ok(ratios(energy, &ladder.eps, &samples, pivot, diag))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubordinateElement {
    pub candidate: CompactSolutionCandidate,
    /// Half-lines on which the solution is identically zero.
    pub vanishing_on: Vec<String>,
    /// Tail-sum evidence on each half-line the solution lives on.
    pub l2: Vec<(String, L2Evidence)>,
    pub square_summable: bool,
    pub residual: f64,
}

impl SubordinateElement {
    pub fn vanishes_on(&self, root: &str) -> bool {
        self.vanishing_on.iter().any(|r| r == root)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubordinateSpaceBasis {
    pub energy: f64,
    /// Square-summable elements first, then completions that vanish on one half-line.
    pub elements: Vec<SubordinateElement>,
    pub dim_lower: usize,
    pub dim_upper: usize,
    /// Dimension of the square-summable subspace.
    pub l2_dim: usize,
    /// Condition number of the Gram matrix of the elements on the window.
    pub gram_condition: f64,
    pub flags: Vec<String>,
}

impl SubordinateSpaceBasis {
    pub fn is_exact(&self) -> bool {
        self.dim_lower == self.dim_upper
    }
}

#[derive(Clone, Debug)]
pub struct SpaceConfig {
    pub classify: ClassifyConfig,
    /// Last slice index computed for each continuation.
    pub length: usize,
    pub l2_threshold: f64,
    /// Half-line sites per branch entering the Gram matrix.
    pub gram_window: usize,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        SpaceConfig {
            classify: ClassifyConfig {
                cross_check: false,
                ..Default::default()
            },
            length: 1 << 14,
            l2_threshold: 1e-8,
            gram_window: 64,
        }
    }
}

/// Per-root constraint kinds for a classification, with inconclusive slices vanishing.
fn kinds(c: &EnergyClassification) -> Vec<(String, RowKind)> {
    c.records
        .iter()
        .map(|r| {
            let k = match &r.status {
                SliceStatus::FinitePositive { .. } | SliceStatus::Inconclusive { .. } => {
                    RowKind::Vanish
                }
                s => RowKind::Angle(s.reciprocal().unwrap()),
            };
            (r.root.clone(), k)
        })
        .collect()
}

/// Kernel vectors of the constraint system with extra half-lines forced to vanish.
fn restricted_kernel(
    model: &CompactModel,
    energy: f64,
    base: &[(String, RowKind)],
    vanish: &[&str],
    threshold: f64,
) -> Vec<DVector<f64>> {
    let ks: Vec<(String, RowKind)> = base
        .iter()
        .map(|(r, k)| {
            (
                r.clone(),
                if vanish.contains(&r.as_str()) {
                    RowKind::Vanish
                } else {
                    *k
                },
            )
        })
        .collect();
    let c = constraint_matrix(model, energy, &ks);
    if c.nrows() == 0 {
        return (0..model.n())
            .map(|i| DVector::from_fn(model.n(), |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
    }
    null_space(&c, threshold).0
}

/// Residual of `v` after projection onto the span of `basis` (orthonormalized).
fn outside_span(basis: &[DVector<f64>], v: &DVector<f64>) -> f64 {
    let mut q: Vec<DVector<f64>> = Vec::new();
    for b in basis {
        let mut w = b.clone();
        for u in &q {
            w -= u * u.dot(&w);
        }
        let n = w.norm();
        if n > 1e-12 {
            q.push(w / n);
        }
    }
    let mut r = v.clone();
    for u in &q {
        r -= u * u.dot(&r);
    }
    r.norm() / v.norm().max(1e-300)
}

/// The subordinate solution space at `E` with a structured basis.
pub fn subordinate_space(
    model: &CompactModel,
    energy: f64,
    cfg: &SpaceConfig,
) -> Result<SubordinateSpaceBasis> {
    let c = classify_model(model, energy, &cfg.classify)?;
    subordinate_space_from(model, &c, cfg)
}

/// [`subordinate_space`] from an existing classification of `model`.
pub fn subordinate_space_from(
    model: &CompactModel,
    c: &EnergyClassification,
    cfg: &SpaceConfig,
) -> Result<SubordinateSpaceBasis> {
    let energy = c.energy;
    let mut flags = c.flags.clone();
    let base = kinds(c);
    let thr = cfg.classify.kernel_threshold;
    let kernel: Vec<DVector<f64>> = restricted_kernel(model, energy, &base, &[], thr);
    let d = kernel.len();

    // which half-lines carry a square-summable subordinate solution
    let mut non_l2: Vec<&str> = Vec::new();
    let mut branch_l2 = Vec::new();
    for rec in &c.records {
        let Some(theta) = rec.status.theta() else {
            continue;
        };
        let op = model
            .slices()
            .iter()
            .find(|s| s.root() == rec.root)
            .and_then(HalfLineSlice::evaluator)
            .expect("root slice")
            .operator();
        let (_, u) = continue_seed(op, energy, BoundaryCondition::new(theta).seed(), cfg.length);
        let ev = l2_evidence(&u, cfg.l2_threshold);
        if !ev.passed {
            non_l2.push(rec.root.as_str());
        }
        branch_l2.push((rec.root.clone(), ev));
    }

    let l2_space = restricted_kernel(model, energy, &base, &non_l2, thr);
    let mut chosen: Vec<DVector<f64>> = Vec::new();
    for v in &l2_space {
        if outside_span(&chosen, v) > 1e-6 {
            chosen.push(v.clone());
        }
    }
    let l2_dim = chosen.len();

    // complete with solutions vanishing on a single half-line, preferring ones that do
    // not vanish where the first element is anchored
    let anchor = chosen
        .first()
        .or(kernel.first())
        .and_then(|v| v.iter().position(|x| x.abs() > 1e-8));
    let roots: Vec<&str> = model.graph.roots.iter().map(|s| s.as_str()).collect();
    while chosen.len() < d {
        let mut pool: Vec<DVector<f64>> = Vec::new();
        for r in &roots {
            pool.extend(restricted_kernel(model, energy, &base, &[r], thr));
        }
        let fresh: Vec<&DVector<f64>> = pool
            .iter()
            .filter(|v| outside_span(&chosen, v) > 1e-6)
            .collect();
        let pick = fresh
            .iter()
            .find(|v| anchor.is_some_and(|a| v[a].abs() > 1e-8))
            .or(fresh.first())
            .map(|v| (*v).clone())
            .or_else(|| {
                kernel
                    .iter()
                    .find(|v| outside_span(&chosen, v) > 1e-6)
                    .cloned()
            });
        match pick {
            Some(v) => chosen.push(v),
            None => break,
        }
    }
    if chosen.len() != d {
        flags.push(format!(
            "structured basis has {} elements for a {d}-dimensional kernel",
            chosen.len()
        ));
    }

    let mut elements = Vec::new();
    for v in &chosen {
        let cand = CompactSolutionCandidate::from_values(model, energy, v);
        let x = extend_compact_solution(model, &cand, cfg.length)?;
        let mut l2 = Vec::new();
        let mut vanishing_on = Vec::new();
        for b in &x.branches {
            if cand.vanishes_on(&b.root) {
                vanishing_on.push(b.root.clone());
            } else {
                l2.push((b.root.clone(), l2_evidence(&b.solution, cfg.l2_threshold)));
            }
        }
        let square_summable = l2.iter().all(|(_, e)| e.passed);
        if x.residual > 1e-10 {
            flags.push(format!("extension residual {:.2e}", x.residual));
        }
        elements.push((
            SubordinateElement {
                candidate: cand,
                vanishing_on,
                l2,
                square_summable,
                residual: x.residual,
            },
            x,
        ));
    }

    // Gram matrix on the compact part plus a window of every half-line
    let gram_condition = if elements.is_empty() {
        1.0
    } else {
        let cols: Vec<Vec<f64>> = elements
            .iter()
            .map(|(e, x)| {
                let mut col = e.candidate.values.clone();
                for b in &x.branches {
                    let w = cfg.gram_window.min(b.solution.len());
                    col.extend((2..=w).map(|n| b.solution.value(n)));
                }
                col
            })
            .collect();
        let rows = cols[0].len();
        let m = DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i]);
        let g = m.transpose() * &m;
        let sv = singular_values_real(&g);
        sv[0] / sv.last().copied().unwrap_or(0.0).max(1e-300)
    };

    Ok(SubordinateSpaceBasis {
        energy,
        elements: elements.into_iter().map(|(e, _)| e).collect(),
        dim_lower: c.kernel_dim,
        dim_upper: c.kernel_dim_upper,
        l2_dim,
        gram_condition,
        flags,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiplicityReport {
    pub energy: f64,
    pub pivot: Option<usize>,
    pub omega: Option<OmegaMatrix>,
    pub omega_rank: Option<usize>,
    pub dim_lower: usize,
    pub dim_upper: usize,
    /// A square-summable subordinate solution exists.
    pub eigenvalue: bool,
    pub k_halflines: usize,
    /// No square-summable element: the half-line count caps the bound.
    pub sc_bound_applicable: bool,
    /// Both candidate caps on such energies, `k` and `k - 1`, as data.
    pub sc_caps: Option<(usize, usize)>,
    pub bound: Option<usize>,
    /// Which bounds produced `bound`.
    pub fired: Vec<String>,
    pub flags: Vec<String>,
}

pub fn multiplicity_report(
    model: &CompactModel,
    energy: f64,
    cfg: &SpaceConfig,
) -> Result<MultiplicityReport> {
    Ok(multiplicity_analysis(model, energy, cfg)?.report)
}

/// Everything behind a multiplicity report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiplicityAnalysis {
    pub classification: EnergyClassification,
    pub space: SubordinateSpaceBasis,
    pub report: MultiplicityReport,
}

pub fn multiplicity_analysis(
    model: &CompactModel,
    energy: f64,
    cfg: &SpaceConfig,
) -> Result<MultiplicityAnalysis> {
    let c = classify_model(model, energy, &cfg.classify)?;
    let space = subordinate_space_from(model, &c, cfg)?;
    let mut flags = space.flags.clone();
    let (omega, omega_rank) = match omega_matrix(model, energy, &cfg.classify.ladder) {
        Ok(o) => {
            if !o.flagged.is_empty() {
                flags.push(format!("{} ratio entries did not settle", o.flagged.len()));
            }
            let r = o.rank(OMEGA_RANK_THRESHOLD);
            (Some(o), r)
        }
        Err(e) => {
            flags.push(format!("omega: {e}"));
            (None, None)
        }
    };
    let k = model.graph.k();
    let eigenvalue = space.l2_dim > 0;
    let sc = space.dim_upper > 0 && !eigenvalue && space.is_exact();
    let mut fired = Vec::new();
    let mut bound = None;
    if space.dim_upper > 0 {
        bound = Some(space.dim_upper);
        fired.push("subordinate-dimension".to_string());
    }
    if sc && k < space.dim_upper {
        bound = Some(k);
        fired.push("half-line-count".to_string());
    }
    if let Ok(star) = star_overlap_of(model, &c) {
        let cap = match star.class {
            OverlapClass::Multiple if !eigenvalue => star.bound,
            OverlapClass::Single => Some(1),
            _ => None,
        };
        if let Some(cap) = cap {
            if bound.is_none_or(|b| cap < b) {
                bound = Some(cap);
                fired.push("star-overlap".to_string());
            }
        }
    }
    if let (Some(r), Some(b)) = (omega_rank, bound) {
        if r > b {
            flags.push(format!("omega rank {r} exceeds bound {b}"));
        }
    }
    let report = MultiplicityReport {
        energy,
        pivot: omega.as_ref().map(|o| o.pivot),
        omega,
        omega_rank,
        dim_lower: space.dim_lower,
        dim_upper: space.dim_upper,
        eigenvalue,
        k_halflines: k,
        sc_bound_applicable: sc,
        sc_caps: sc.then(|| (k, k.saturating_sub(1))),
        bound,
        fired,
        flags,
    };
    Ok(MultiplicityAnalysis {
        classification: c,
        space,
        report,
    })
}

pub fn multiplicity_bound(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    energy: f64,
    cfg: &SpaceConfig,
) -> Result<MultiplicityReport> {
    multiplicity_report(&CompactModel::new(graph, coeffs)?, energy, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapClass {
    /// Singular for at least two branches at once.
    Multiple,
    /// Singular for at most one branch, and a global subordinate solution exists.
    Single,
    Neither,
}

impl OverlapClass {
    pub fn label(&self) -> &'static str {
        match self {
            OverlapClass::Multiple => "S1",
            OverlapClass::Single => "S2nS",
            OverlapClass::Neither => "neither",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StarOverlap {
    pub energy: f64,
    pub center: String,
    /// Per leaf: whether the Dirichlet solution of its branch is subordinate.
    pub memberships: Vec<(String, bool)>,
    pub class: OverlapClass,
    pub in_s: bool,
    /// `n - 1` for `Multiple`, `1` for `Single`.
    pub bound: Option<usize>,
}

/// Center of a star: a vertex without half-line whose neighbors are leaves that each carry one.
pub fn star_center(graph: &StarLikeGraph) -> Result<String> {
    let not_star = || Error::Precondition("graph is not a star".into());
    let centers: Vec<&String> = graph
        .compact
        .iter()
        .filter(|v| !graph.has_halfline(v))
        .collect();
    if centers.len() != 1 || graph.compact.len() < 3 {
        return Err(not_star());
    }
    let c = centers[0];
    for v in &graph.compact {
        if v == c {
            continue;
        }
        let nb: Vec<&str> = graph.compact_neighbors(v).collect();
        if nb != [c.as_str()] || !graph.has_halfline(v) {
            return Err(not_star());
        }
    }
    Ok(c.clone())
}

fn star_overlap_from(
    model: &CompactModel,
    energy: f64,
    cfg: &ClassifyConfig,
) -> Result<StarOverlap> {
    star_center(&model.graph)?;
    let c = classify_model(
        model,
        energy,
        &ClassifyConfig {
            cross_check: false,
            ..cfg.clone()
        },
    )?;
    star_overlap_of(model, &c)
}

/// Overlap class read off an existing classification of a star model.
pub fn star_overlap_of(model: &CompactModel, c: &EnergyClassification) -> Result<StarOverlap> {
    let center = star_center(&model.graph)?;
    let energy = c.energy;
    let memberships: Vec<(String, bool)> = c
        .records
        .iter()
        .map(|r| {
            (
                r.root.clone(),
                matches!(r.status, SliceStatus::Divergent { .. }),
            )
        })
        .collect();
    let count = memberships.iter().filter(|m| m.1).count();
    let n = memberships.len();
    let (class, bound) = if count >= 2 {
        (OverlapClass::Multiple, Some(n - 1))
    } else if c.singular_candidate {
        (OverlapClass::Single, Some(1))
    } else {
        (OverlapClass::Neither, None)
    };
    Ok(StarOverlap {
        energy,
        center,
        memberships,
        class,
        in_s: c.singular_candidate,
        bound,
    })
}

/// Branch overlap class of a star graph at `E`.
pub fn star_overlap_classify(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    energy: f64,
    cfg: &ClassifyConfig,
) -> Result<StarOverlap> {
    star_overlap_from(&CompactModel::new(graph, coeffs)?, energy, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::shapes;

    #[test]
    fn rank_examples() {
        assert_eq!(rank_of(&DMatrix::identity(3, 3), 1e-8), 3);
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(rank_of(&(&u * u.transpose()), 1e-8), 1);
        assert_eq!(rank_of(&DMatrix::zeros(3, 3), 1e-8), 0);
    }

    #[test]
    fn half_line_self_ratio() {
        let (g, c) = shapes::half_line();
        let m = CompactModel::new(&g, &c).unwrap();
        let o = omega_matrix(&m, 3.0, &EpsLadder::default()).unwrap();
        assert_eq!(o.pivot, 0);
        assert!((o.entries[0][0] - 1.0).abs() < 1e-12);
        assert_eq!(o.rank(OMEGA_RANK_THRESHOLD), Some(1));
    }

    #[test]
    fn line_with_bump() {
        // free line with b = 5 at one site: simple eigenvalue sqrt(29)
        let (g, mut c) = shapes::line();
        c.set_b("l", 5.0);
        let m = CompactModel::new(&g, &c).unwrap();
        let e = 29f64.sqrt();
        let o = omega_matrix(&m, e, &EpsLadder::default()).unwrap();
        assert_eq!(o.rank(OMEGA_RANK_THRESHOLD), Some(1), "{o:?}");
        let r = multiplicity_report(
            &m,
            e,
            &SpaceConfig {
                length: 400,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!((r.dim_lower, r.dim_upper), (1, 1));
        assert!(r.eigenvalue);
        assert_eq!(r.bound, Some(1));
    }

    #[test]
    fn star_center_detection() {
        let (g, _) = shapes::star(3);
        assert_eq!(star_center(&g).unwrap(), "c");
        let (g, _) = shapes::triangle();
        assert!(star_center(&g).is_err());
    }

    #[test]
    fn star_band_energy_is_neither() {
        let (g, c) = shapes::star(3);
        let s = star_overlap_classify(&g, &c, 0.5, &ClassifyConfig::default()).unwrap();
        assert_eq!(s.class, OverlapClass::Neither);
        assert!(s.memberships.iter().all(|m| !m.1));
    }
}
