//! Energy classification from boundary values of the slice m-functions.
//!
//! At a real energy `E` each half-line slice `J_k` is put in one of four classes by the
//! ladder limit of `m_k(E + i eps)`:
//!
//! * finite with positive imaginary part: `E` lies in the essential support of the
//!   absolutely continuous part of `J_k`, so in that of `J`;
//! * finite and real, `m_k = cot theta`: the solution with boundary angle `theta` is
//!   subordinate on the slice;
//! * divergent: the Dirichlet solution is subordinate (`theta = 0`);
//! * inconclusive.
//!
//! A solution of `J phi = E phi` on the whole graph is fixed by its compact values `alpha`.
//! On slice `k` it continues the seed `(u_0, u_1) = ((A alpha)_k, alpha_k)`, where `A` is
//! the compact adjacency. It is subordinate everywhere exactly when every seed is either
//! zero or proportional to the subordinate one, which is a linear system in `alpha`:
//!
//! ```text
//! vertex without half-line:  (A alpha)_j + (b_j - E) alpha_j = 0
//! real limit theta_k:        cos(theta_k) (A alpha)_k + sin(theta_k) alpha_k = 0
//! finite positive:           alpha_k = 0,  (A alpha)_k = 0
//! ```
//!
//! Its null space is the space of compact solution candidates.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{analyze, growth_exponent, EpsLadder, Limit, ZERO_TOLERANCE};
use crate::error::{Error, Result};
use crate::graph::{JacobiCoefficients, StarLikeGraph};
use crate::halfline::{
    detect_subordinate, iterate_from_seed, miller_solution, minimal_solution, recurrence_residual,
    BoundaryCondition, DetectConfig, HalfLineSolution, MBoundary, Verdict,
};
use crate::linalg::null_space;
use crate::mmatrix::{CompactModel, HalfLineSlice};
use crate::sequence::HalfLineOperator;

/// Boundary behaviour of one slice m-function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SliceStatus {
    FinitePositive {
        m: Complex64,
    },
    /// `m = cot(theta)`; `reciprocal = tan(theta)`.
    RealLimit {
        reciprocal: f64,
        theta: f64,
    },
    /// `m` blows up like `eps^-exponent`; the Dirichlet angle.
    Divergent {
        exponent: f64,
    },
    Inconclusive {
        reason: String,
    },
}

impl SliceStatus {
    pub fn is_conclusive(&self) -> bool {
        !matches!(self, SliceStatus::Inconclusive { .. })
    }

    /// Angle of the subordinate solution, when there is one.
    pub fn theta(&self) -> Option<f64> {
        match self {
            SliceStatus::RealLimit { theta, .. } => Some(*theta),
            SliceStatus::Divergent { .. } => Some(0.0),
            _ => None,
        }
    }

    /// `tan(theta)`, the real boundary value of `1/m`.
    pub fn reciprocal(&self) -> Option<f64> {
        match self {
            SliceStatus::RealLimit { reciprocal, .. } => Some(*reciprocal),
            SliceStatus::Divergent { .. } => Some(0.0),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SliceStatus::FinitePositive { .. } => "finite_positive",
            SliceStatus::RealLimit { .. } => "real_limit",
            SliceStatus::Divergent { .. } => "divergent",
            SliceStatus::Inconclusive { .. } => "inconclusive",
        }
    }

    fn real(reciprocal: f64) -> Self {
        SliceStatus::RealLimit {
            reciprocal,
            theta: BoundaryCondition::new(reciprocal.atan()).theta(),
        }
    }
}

/// Status from ladder samples of `1/m_k(E + i eps)`.
pub fn slice_status(eps: &[f64], reciprocals: &[Complex64]) -> SliceStatus {
    let ms: Vec<Complex64> = reciprocals.iter().map(|r| 1.0 / r).collect();
    let lm = analyze(eps, &ms);
    match &lm {
        Limit::Divergent { exponent } => {
            return SliceStatus::Divergent {
                exponent: *exponent,
            }
        }
        Limit::Finite { value, .. } => {
            if lm.is_real() {
                return SliceStatus::real(1.0 / value.re);
            }
            if value.im > 0.0 {
                return SliceStatus::FinitePositive { m: *value };
            }
        }
        Limit::Inconclusive { .. } => {}
    }
    // slow blow-up of m shows as 1/m tending to zero
    let lr = analyze(eps, reciprocals);
    match &lr {
        Limit::Finite { value, error } if lr.is_real() => {
            if value.re.abs() <= 3.0 * error + ZERO_TOLERANCE {
                SliceStatus::Divergent {
                    exponent: growth_exponent(eps, &ms),
                }
            } else {
                SliceStatus::real(value.re)
            }
        }
        Limit::Finite { value, .. } if value.im < 0.0 => {
            SliceStatus::FinitePositive { m: 1.0 / value }
        }
        _ => {
            let reason = match lm {
                Limit::Inconclusive { reason } => reason,
                Limit::Finite { value, .. } => format!("limit {value} has negative imaginary part"),
                Limit::Divergent { .. } => unreachable!(),
            };
            SliceStatus::Inconclusive { reason }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HalfLineRecord {
    pub root: String,
    pub status: SliceStatus,
    /// Independent truncated-norm check of the subordinate solution, where one was run.
    pub cross_check: Option<CrossCheck>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossCheck {
    pub verdict: Verdict,
    pub theta: Option<f64>,
    pub agrees: bool,
}

/// How the candidate continues onto one half-line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    pub root: String,
    /// `((A alpha)_k, alpha_k)`.
    pub seed: (f64, f64),
    pub vanishes: bool,
}

/// Compact values of a global generalized eigenfunction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactSolutionCandidate {
    pub energy: f64,
    /// Compact vertex names in graph order.
    pub order: Vec<String>,
    pub values: Vec<f64>,
    pub continuations: Vec<Continuation>,
}

impl CompactSolutionCandidate {
    pub fn from_values(model: &CompactModel, energy: f64, values: &DVector<f64>) -> Self {
        let mut v = values.clone();
        let top = v.amax();
        if top > 0.0 {
            v /= top;
            v.apply(|x| {
                if x.abs() < 1e-12 {
                    *x = 0.0
                }
            });
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    v = -v;
                }
            }
        }
        let av = model.adjacency() * &v;
        let g = &model.graph;
        let continuations = g
            .roots
            .iter()
            .map(|r| {
                let i = g.index_of(r).expect("validated");
                let seed = (av[i], v[i]);
                Continuation {
                    root: r.clone(),
                    seed,
                    vanishes: seed.0.abs().max(seed.1.abs()) <= 1e-10,
                }
            })
            .collect();
        CompactSolutionCandidate {
            energy,
            order: g.compact.clone(),
            values: v.iter().copied().collect(),
            continuations,
        }
    }

    pub fn value_at(&self, vertex: &str) -> Option<f64> {
        self.order
            .iter()
            .position(|v| v == vertex)
            .map(|i| self.values[i])
    }

    pub fn vanishes_on(&self, root: &str) -> bool {
        self.continuations
            .iter()
            .any(|c| c.root == root && c.vanishes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ac,
    Singular,
    Both,
    Neither,
    Inconclusive,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Ac => "ac",
            Status::Singular => "sing",
            Status::Both => "ac+sing",
            Status::Neither => "neither",
            Status::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyClassification {
    pub energy: f64,
    pub records: Vec<HalfLineRecord>,
    /// Some slice has a finite boundary value with positive imaginary part.
    pub ac_support_member: bool,
    /// A nonzero global solution is subordinate on every half-line.
    pub singular_candidate: bool,
    pub status: Status,
    /// Null space dimension with inconclusive slices forced to vanish.
    pub kernel_dim: usize,
    /// Null space dimension with inconclusive slices unconstrained.
    pub kernel_dim_upper: usize,
    /// Singular values of the constraint matrix, descending.
    pub singular_values: Vec<f64>,
    pub candidates: Vec<CompactSolutionCandidate>,
    pub flags: Vec<String>,
}

impl EnergyClassification {
    pub fn record(&self, root: &str) -> Option<&HalfLineRecord> {
        self.records.iter().find(|r| r.root == root)
    }

    pub fn is_conclusive(&self) -> bool {
        self.status != Status::Inconclusive
    }
}

#[derive(Clone, Debug)]
pub struct ClassifyConfig {
    pub ladder: EpsLadder,
    /// Relative singular-value cut for the constraint null space.
    pub kernel_threshold: f64,
    /// Run the truncated-norm detector on every slice a candidate lives on.
    pub cross_check: bool,
    pub detect: DetectConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            ladder: EpsLadder::default(),
            kernel_threshold: 1e-8,
            cross_check: true,
            detect: DetectConfig::default(),
        }
    }
}

/// Per-root ladder statuses at energy `E`, in root order.
pub fn slice_statuses(
    model: &CompactModel,
    energy: f64,
    ladder: &EpsLadder,
) -> Result<Vec<(String, SliceStatus)>> {
    ladder.validate()?;
    let mut out = Vec::new();
    for s in model.slices() {
        if let HalfLineSlice::HalfLine { root, .. } = s {
            let rs = ladder
                .eps
                .iter()
                .map(|&e| s.reciprocal(Complex64::new(energy, e)))
                .collect::<Result<Vec<_>>>()?;
            out.push((root.clone(), slice_status(&ladder.eps, &rs)));
        }
    }
    Ok(out)
}

/// How a slice enters the compact system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RowKind {
    /// `cos(theta) u_0 + sin(theta) u_1 = 0` with `tan(theta) = reciprocal`.
    Angle(f64),
    /// `u_0 = u_1 = 0`.
    Vanish,
    /// No constraint.
    Free,
}

/// Row-normalized constraint matrix on the compact values.
pub fn constraint_matrix(
    model: &CompactModel,
    energy: f64,
    kinds: &[(String, RowKind)],
) -> DMatrix<f64> {
    let n = model.n();
    let a = model.adjacency();
    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut push = |r: DVector<f64>| {
        let norm = r.norm();
        if norm > 0.0 {
            rows.push(r / norm);
        }
    };
    for (j, s) in model.slices().iter().enumerate() {
        let adj = a.row(j).transpose().into_owned();
        let mut own = DVector::zeros(n);
        own[j] = 1.0;
        match s {
            HalfLineSlice::Singleton { b, .. } => push(adj + own * (*b - energy)),
            HalfLineSlice::HalfLine { root, .. } => {
                let kind = kinds
                    .iter()
                    .find(|(r, _)| r == root)
                    .map(|(_, k)| *k)
                    .unwrap_or(RowKind::Free);
                match kind {
                    RowKind::Angle(t) => push(adj + own * t),
                    RowKind::Vanish => {
                        push(adj);
                        push(own);
                    }
                    RowKind::Free => {}
                }
            }
        }
    }
    let mut m = DMatrix::zeros(rows.len(), n);
    for (i, r) in rows.iter().enumerate() {
        m.row_mut(i).copy_from(&r.transpose());
    }
    m
}

fn kinds_for(statuses: &[(String, SliceStatus)], inconclusive: RowKind) -> Vec<(String, RowKind)> {
    statuses
        .iter()
        .map(|(r, s)| {
            let k = match s {
                SliceStatus::FinitePositive { .. } => RowKind::Vanish,
                SliceStatus::Inconclusive { .. } => inconclusive,
                _ => RowKind::Angle(s.reciprocal().unwrap()),
            };
            (r.clone(), k)
        })
        .collect()
}

fn kernel(
    model: &CompactModel,
    energy: f64,
    kinds: &[(String, RowKind)],
    threshold: f64,
) -> (Vec<DVector<f64>>, Vec<f64>) {
    let c = constraint_matrix(model, energy, kinds);
    if c.nrows() == 0 {
        let basis = (0..model.n())
            .map(|i| DVector::from_fn(model.n(), |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        return (basis, vec![0.0; model.n()]);
    }
    null_space(&c, threshold)
}

fn angle_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(PI);
    d.min(PI - d)
}

/// Classifies one energy of an already assembled model.
pub fn classify_model(
    model: &CompactModel,
    energy: f64,
    cfg: &ClassifyConfig,
) -> Result<EnergyClassification> {
    if !energy.is_finite() {
        return Err(Error::Precondition(format!(
            "energy must be finite, got {energy}"
        )));
    }
    let statuses = slice_statuses(model, energy, &cfg.ladder)?;
    let ac = statuses
        .iter()
        .any(|(_, s)| matches!(s, SliceStatus::FinitePositive { .. }));
    let any_inconclusive = statuses.iter().any(|(_, s)| !s.is_conclusive());

    let (lower, sv) = kernel(
        model,
        energy,
        &kinds_for(&statuses, RowKind::Vanish),
        cfg.kernel_threshold,
    );
    let upper = if any_inconclusive {
        kernel(
            model,
            energy,
            &kinds_for(&statuses, RowKind::Free),
            cfg.kernel_threshold,
        )
        .0
        .len()
    } else {
        lower.len()
    };
    let candidates: Vec<CompactSolutionCandidate> = lower
        .iter()
        .map(|v| CompactSolutionCandidate::from_values(model, energy, v))
        .collect();
    let singular = !candidates.is_empty();

    let mut flags = Vec::new();
    for (r, s) in &statuses {
        if let SliceStatus::Inconclusive { reason } = s {
            flags.push(format!("{r}: inconclusive ({reason})"));
        }
    }
    if !singular && upper > 0 {
        flags.push(format!("kernel dimension between 0 and {upper}"));
    }

    let mut records: Vec<HalfLineRecord> = statuses
        .iter()
        .map(|(r, s)| HalfLineRecord {
            root: r.clone(),
            status: s.clone(),
            cross_check: None,
        })
        .collect();
    if cfg.cross_check && singular {
        for rec in records.iter_mut() {
            let Some(theta) = rec.status.theta() else {
                continue;
            };
            if candidates.iter().all(|c| c.vanishes_on(&rec.root)) {
                continue;
            }
            let slice = model
                .slices()
                .iter()
                .find(|s| s.root() == rec.root)
                .expect("root slice");
            let op = slice.evaluator().expect("half-line").operator();
            let mut dc = cfg.detect.clone();
            dc.m_boundary = Some(match rec.status.reciprocal() {
                Some(r) if r != 0.0 => MBoundary::Value(Complex64::new(1.0 / r, 0.0)),
                _ => MBoundary::Infinity,
            });
            let v = detect_subordinate(op, energy, &dc)?;
            let agrees = v.verdict == Verdict::SubordinateExists
                && v.theta.is_some_and(|t| angle_distance(t, theta) < 1e-3);
            match v.verdict {
                Verdict::SubordinateExists if !agrees => flags.push(format!(
                    "{}: detector angle differs from boundary value",
                    rec.root
                )),
                Verdict::NoSubordinate => flags.push(format!(
                    "{}: detector finds no subordinate solution",
                    rec.root
                )),
                Verdict::Inconclusive => flags.push(format!("{}: detector inconclusive", rec.root)),
                _ => {}
            }
            rec.cross_check = Some(CrossCheck {
                verdict: v.verdict,
                theta: v.theta,
                agrees,
            });
        }
    }

    let status = if any_inconclusive {
        Status::Inconclusive
    } else {
        match (ac, singular) {
            (true, true) => Status::Both,
            (true, false) => Status::Ac,
            (false, true) => Status::Singular,
            (false, false) => Status::Neither,
        }
    };
    Ok(EnergyClassification {
        energy,
        records,
        ac_support_member: ac,
        singular_candidate: singular,
        status,
        kernel_dim: lower.len(),
        kernel_dim_upper: upper,
        singular_values: sv,
        candidates,
        flags,
    })
}

pub fn classify_energy(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    energy: f64,
    cfg: &ClassifyConfig,
) -> Result<EnergyClassification> {
    classify_model(&CompactModel::new(graph, coeffs)?, energy, cfg)
}

/// Evenly spaced grid `min..=max` with `count` points.
pub fn grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite()) || count == 0 || (count > 1 && !(max > min)) {
        return Err(Error::Precondition(format!("bad grid {min}:{max}:{count}")));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let h = (max - min) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                max
            } else {
                min + i as f64 * h
            }
        })
        .collect())
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub ac: usize,
    pub singular: usize,
    pub both: usize,
    pub neither: usize,
    pub inconclusive: usize,
    pub errors: usize,
}

pub struct ScanResult {
    pub points: Vec<(f64, Result<EnergyClassification>)>,
    pub summary: ScanSummary,
}

/// Classifies every grid energy in parallel; results keep grid order and per-point
/// failures stay local to their point.
pub fn scan(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    energies: &[f64],
    cfg: &ClassifyConfig,
) -> Result<ScanResult> {
    cfg.ladder.validate()?;
    let model = CompactModel::new(graph, coeffs)?;
    let points: Vec<(f64, Result<EnergyClassification>)> = energies
        .par_iter()
        .map(|&e| (e, classify_model(&model, e, cfg)))
        .collect();
    let mut summary = ScanSummary::default();
    for (_, p) in &points {
        match p {
            Err(_) => summary.errors += 1,
            Ok(c) => match c.status {
                Status::Ac => summary.ac += 1,
                Status::Singular => summary.singular += 1,
                Status::Both => summary.both += 1,
                Status::Neither => summary.neither += 1,
                Status::Inconclusive => summary.inconclusive += 1,
            },
        }
    }
    Ok(ScanResult { points, summary })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Backward recursion from the exact decaying tail.
    Minimal,
    /// Backward recursion from far out; the seed matched the result.
    Miller,
    Forward,
    Zero,
}

#[derive(Clone, Debug)]
pub struct BranchExtension {
    pub root: String,
    pub method: Method,
    pub solution: HalfLineSolution,
}

#[derive(Clone, Debug)]
pub struct ExtendedSolution {
    pub candidate: CompactSolutionCandidate,
    pub branches: Vec<BranchExtension>,
    /// Largest relative residual of `J phi = E phi` over the compact part and the
    /// computed half-line sites.
    pub residual: f64,
}

impl ExtendedSolution {
    pub fn branch(&self, root: &str) -> Option<&BranchExtension> {
        self.branches.iter().find(|b| b.root == root)
    }
}

/// Solution with seed `(u_0, u_1)` up to index `length`, from the most stable method that
/// reproduces the seed: the exact decaying tail, Miller's backward recursion, or plain
/// forward iteration.
pub fn continue_seed(
    op: &HalfLineOperator,
    energy: f64,
    seed: (f64, f64),
    length: usize,
) -> (Method, HalfLineSolution) {
    let (u0, u1) = seed;
    let parallel = |m: &HalfLineSolution| {
        let (m0, m1) = (m.value(0), m.value(1));
        if (u0 * m1 - u1 * m0).abs() <= 1e-8 * u0.hypot(u1) * m0.hypot(m1) {
            Some(m.scaled((u0 * m0 + u1 * m1) / (m0 * m0 + m1 * m1)))
        } else {
            None
        }
    };
    if let Some(m) = minimal_solution(op, energy, length)
        .as_ref()
        .and_then(parallel)
    {
        (Method::Minimal, m)
    } else if let Some(m) = parallel(&miller_solution(op, energy, length, 4 * length)) {
        (Method::Miller, m)
    } else {
        (Method::Forward, iterate_from_seed(op, energy, seed, length))
    }
}

/// Continues a compact candidate onto every half-line, to index `length` of each slice
/// solution (index 1 is the root).
pub fn extend_compact_solution(
    model: &CompactModel,
    candidate: &CompactSolutionCandidate,
    length: usize,
) -> Result<ExtendedSolution> {
    let g = &model.graph;
    if candidate.order != g.compact {
        return Err(Error::Precondition(
            "candidate does not match the graph's compact vertices".into(),
        ));
    }
    let e = candidate.energy;
    let alpha = DVector::from_column_slice(&candidate.values);
    let av = model.adjacency() * &alpha;
    let scale = alpha.amax().max(1e-300);

    // compact equations at vertices without a half-line
    let mut residual = 0.0f64;
    for (j, s) in model.slices().iter().enumerate() {
        if let HalfLineSlice::Singleton { b, .. } = s {
            let r = av[j] + (b - e) * alpha[j];
            let size = model
                .adjacency()
                .row(j)
                .iter()
                .zip(alpha.iter())
                .map(|(x, y)| (x * y).abs())
                .sum::<f64>()
                + (b - e).abs() * alpha[j].abs();
            residual = residual.max(r.abs() / size.max(scale));
        }
    }
    if residual > 1e-8 {
        return Err(Error::Precondition(format!(
            "candidate violates the compact equations (residual {residual:.2e})"
        )));
    }

    let length = length.max(2);
    let mut branches = Vec::new();
    for c in &candidate.continuations {
        let op = model
            .slices()
            .iter()
            .find(|s| s.root() == c.root)
            .and_then(|s| s.evaluator())
            .ok_or_else(|| Error::Precondition(format!("no half-line at {}", c.root)))?
            .operator();
        let (u0, u1) = (
            av[g.index_of(&c.root).unwrap()],
            alpha[g.index_of(&c.root).unwrap()],
        );
        let (method, solution) = if c.vanishes {
            (
                Method::Zero,
                HalfLineSolution::from_values(e, vec![0.0; length + 1]),
            )
        } else {
            continue_seed(op, e, (u0, u1), length)
        };
        if method != Method::Zero {
            residual = residual.max(recurrence_residual(op, &solution));
        }
        branches.push(BranchExtension {
            root: c.root.clone(),
            method,
            solution,
        });
    }
    Ok(ExtendedSolution {
        candidate: candidate.clone(),
        branches,
        residual,
    })
}

/// Ladder samples `f(E + i eps_j)` at a set of energies.
#[derive(Clone, Debug)]
pub struct LadderSamples {
    pub eps: Vec<f64>,
    pub points: Vec<(f64, Vec<Complex64>)>,
}

pub fn sample_ladder<F>(energies: &[f64], ladder: &EpsLadder, f: F) -> Result<LadderSamples>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let points = energies
        .par_iter()
        .map(|&e| {
            ladder
                .eps
                .iter()
                .map(|&h| f(Complex64::new(e, h)))
                .collect::<Result<Vec<_>>>()
                .map(|v| (e, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LadderSamples {
        eps: ladder.eps.clone(),
        points,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StieltjesPoint {
    pub energy: f64,
    /// `lim Im F(E + i eps) / pi`, when finite.
    pub density: Option<f64>,
    pub density_error: Option<f64>,
    /// `lim eps Im F(E + i eps)`, when `Im F` blows up.
    pub atom: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StieltjesInversion {
    pub points: Vec<StieltjesPoint>,
    pub atoms: Vec<(f64, f64)>,
}

/// Recovers density values and point masses of the measure behind a Herglotz function
/// from its ladder samples. Atoms are seen only at grid energies.
pub fn stieltjes_invert(samples: &LadderSamples) -> StieltjesInversion {
    let eps = &samples.eps;
    let mut points = Vec::new();
    let mut atoms = Vec::new();
    for (e, values) in &samples.points {
        let im: Vec<Complex64> = values
            .iter()
            .map(|v| Complex64::new(v.im / PI, 0.0))
            .collect();
        let mut p = StieltjesPoint {
            energy: *e,
            density: None,
            density_error: None,
            atom: None,
        };
        match analyze(eps, &im) {
            Limit::Finite { value, error } => {
                p.density = Some(value.re);
                p.density_error = Some(error);
            }
            Limit::Divergent { .. } => {
                let w: Vec<Complex64> = values
                    .iter()
                    .zip(eps)
                    .map(|(v, h)| Complex64::new(v.im * h, 0.0))
                    .collect();
                if let Limit::Finite { value, .. } = analyze(eps, &w) {
                    if value.re > 1e-8 {
                        p.atom = Some(value.re);
                        atoms.push((*e, value.re));
                    }
                }
            }
            Limit::Inconclusive { .. } => {}
        }
        points.push(p);
    }
    StieltjesInversion { points, atoms }
}

/// Height above the axis at which the locator reads boundary values.
const LOCATOR_HEIGHT: f64 = 1e-13;

/// Smallest relative singular value of the constraint matrix, with boundary values read
/// just above the axis. Vanishes where a global subordinate solution exists.
pub fn constraint_gap(model: &CompactModel, energy: f64) -> Result<f64> {
    let z = Complex64::new(energy, LOCATOR_HEIGHT);
    let mut kinds = Vec::new();
    for s in model.slices() {
        if let HalfLineSlice::HalfLine { root, .. } = s {
            let r = s.reciprocal(z)?;
            let k = if r.im.abs() > 1e-6 * (1.0 + r.norm()) {
                RowKind::Vanish
            } else {
                RowKind::Angle(r.re)
            };
            kinds.push((root.clone(), k));
        }
    }
    let c = constraint_matrix(model, energy, &kinds);
    let (_, sv) = null_space(&c, 0.0);
    let top = sv.first().copied().unwrap_or(0.0);
    Ok(if top > 0.0 {
        sv.last().copied().unwrap_or(0.0) / top
    } else {
        0.0
    })
}

/// Energies in `[lo, hi]` where the constraint gap closes: a grid of `count` points,
/// then golden-section refinement around every local minimum. Meant for energies
/// off the absolutely continuous spectrum, where these are the eigenvalues.
pub fn locate_singular_energies(
    model: &CompactModel,
    lo: f64,
    hi: f64,
    count: usize,
) -> Result<Vec<f64>> {
    let es = grid(lo, hi, count.max(3))?;
    let gaps = es
        .iter()
        .map(|&e| constraint_gap(model, e))
        .collect::<Result<Vec<_>>>()?;
    let mut found: Vec<f64> = Vec::new();
    for i in 0..es.len() {
        let left = if i == 0 { f64::INFINITY } else { gaps[i - 1] };
        let right = if i + 1 == es.len() {
            f64::INFINITY
        } else {
            gaps[i + 1]
        };
        if !(gaps[i] < left && gaps[i] <= right) {
            continue;
        }
        let (mut a, mut b) = (es[i.saturating_sub(1)], es[(i + 1).min(es.len() - 1)]);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let mut f1 = constraint_gap(model, x1)?;
        let mut f2 = constraint_gap(model, x2)?;
        while b - a > 1e-14 * (1.0 + a.abs()) {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = constraint_gap(model, x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = constraint_gap(model, x2)?;
            }
        }
        let (x, f) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
        if f < 1e-8 && found.iter().all(|y| (y - x).abs() > 1e-9) {
            found.push(x);
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::shapes;
    use crate::halfline::l2_evidence;

    fn quick() -> ClassifyConfig {
        ClassifyConfig {
            cross_check: false,
            ..Default::default()
        }
    }

    #[test]
    fn free_half_line_statuses() {
        let (g, c) = shapes::half_line();
        let m = CompactModel::new(&g, &c).unwrap();
        let s = slice_statuses(&m, 0.0, &EpsLadder::default()).unwrap();
        assert!(
            matches!(s[0].1, SliceStatus::FinitePositive { m } if (m - Complex64::new(0.0, 1.0)).norm() < 1e-6)
        );
        let s = slice_statuses(&m, 3.0, &EpsLadder::default()).unwrap();
        let want = 2.0 / (5f64.sqrt() - 3.0);
        assert!(
            matches!(s[0].1, SliceStatus::RealLimit { reciprocal, .. } if (reciprocal - want).abs() < 1e-8)
        );
    }

    #[test]
    fn free_half_line_is_not_singular_off_band() {
        // the only global solution is the Dirichlet one, which grows at E = 3
        let (g, c) = shapes::half_line();
        for e in [-3.0, 3.0] {
            let r = classify_energy(&g, &c, e, &quick()).unwrap();
            assert_eq!(r.status, Status::Neither);
        }
        let r = classify_energy(&g, &c, 1.0, &quick()).unwrap();
        assert_eq!(r.status, Status::Ac);
    }

    #[test]
    fn free_star_eigenvalue() {
        // three free arms glued at a center: eigenvalues at +-3/sqrt(2)
        let (g, c) = shapes::star(3);
        let m = CompactModel::new(&g, &c).unwrap();
        let found = locate_singular_energies(&m, 2.05, 4.0, 200).unwrap();
        assert_eq!(found.len(), 1);
        let e = 3.0 / 2f64.sqrt();
        assert!((found[0] - e).abs() < 1e-10, "{found:?}");
        let r = classify_model(&m, found[0], &ClassifyConfig::default()).unwrap();
        assert!(r.singular_candidate && r.kernel_dim == 1, "{r:?}");
        let x = extend_compact_solution(&m, &r.candidates[0], 200).unwrap();
        assert!(x.residual < 1e-10);
        for b in &x.branches {
            assert_eq!(b.method, Method::Minimal);
            assert!(l2_evidence(&b.solution, 1e-8).passed);
        }
        assert!(
            r.records
                .iter()
                .all(|rec| rec.cross_check.as_ref().is_some_and(|c| c.agrees)),
            "{r:?}"
        );
    }

    #[test]
    fn dirichlet_ladder_limit() {
        // 1/m -> 0 at an eigenvalue of the slice
        let eps = EpsLadder::default().eps;
        let rs: Vec<Complex64> = eps.iter().map(|&e| Complex64::new(0.0, -e)).collect();
        assert!(matches!(
            slice_status(&eps, &rs),
            SliceStatus::Divergent { .. }
        ));
    }

    #[test]
    fn stieltjes_of_free_half_line() {
        let (g, c) = shapes::half_line();
        let m = CompactModel::new(&g, &c).unwrap();
        let s = m.slice(0).clone();
        let samples = sample_ladder(&[0.0, 1.0, 3.0], &EpsLadder::powers_of_two(3, 20), |z| {
            Ok(1.0 / s.reciprocal(z)?)
        })
        .unwrap();
        let inv = stieltjes_invert(&samples);
        for p in &inv.points {
            let want = if p.energy.abs() < 2.0 {
                (4.0 - p.energy * p.energy).sqrt() / (2.0 * PI)
            } else {
                0.0
            };
            assert!((p.density.unwrap() - want).abs() < 1e-7, "{p:?}");
        }
        assert!(inv.atoms.is_empty());
    }

    #[test]
    fn grid_endpoints() {
        let g = grid(-1.0, 1.0, 5).unwrap();
        assert_eq!(g, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(grid(1.0, 0.0, 3).is_err());
    }
}
