//! Star-like graphs: a finite connected compact part with at most one half-line hanging
//! off each compact vertex, plus the Jacobi coefficients living on it.
//!
//! The operator acts by
//!
//! ```text
//! (J phi)(u) = sum_{w ~ u} a_(u,w) phi(w) + b_u phi(u)
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sequence::{root_key, HalfLineData, HalfLineOperator, Tail};

/// Compact vertices are named; half-line vertices are `(root, index)` with `index >= 1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexId {
    Compact(String),
    HalfLine { root: String, index: usize },
}

impl VertexId {
    pub fn compact(name: &str) -> Self {
        VertexId::Compact(name.to_string())
    }

    pub fn site(root: &str, index: usize) -> Self {
        VertexId::HalfLine {
            root: root.to_string(),
            index,
        }
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexId::Compact(s) => write!(f, "{s}"),
            VertexId::HalfLine { root, index } => write!(f, "{root}[{index}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StarLikeGraph {
    pub compact: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub roots: Vec<String>,
}

impl StarLikeGraph {
    pub fn new(compact: &[&str], edges: &[(&str, &str)], roots: &[&str]) -> Self {
        StarLikeGraph {
            compact: compact.iter().map(|s| s.to_string()).collect(),
            edges: edges
                .iter()
                .map(|(u, v)| (u.to_string(), v.to_string()))
                .collect(),
            roots: roots.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.compact.len()
    }

    pub fn k(&self) -> usize {
        self.roots.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.compact.iter().position(|c| c == name)
    }

    pub fn has_halfline(&self, name: &str) -> bool {
        self.roots.iter().any(|r| r == name)
    }

    /// Compact neighbors of `name`.
    pub fn compact_neighbors<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.iter().filter_map(move |(u, v)| {
            if u == name {
                Some(v.as_str())
            } else if v == name {
                Some(u.as_str())
            } else {
                None
            }
        })
    }
}

/// Unordered edge key.
pub fn edge_key(u: &str, v: &str) -> (String, String) {
    if u <= v {
        (u.to_string(), v.to_string())
    } else {
        (v.to_string(), u.to_string())
    }
}

#[derive(Clone, Debug, Default)]
pub struct JacobiCoefficients {
    pub b: BTreeMap<String, f64>,
    pub a: BTreeMap<(String, String), f64>,
    pub halflines: BTreeMap<String, HalfLineData>,
}

impl JacobiCoefficients {
    pub fn set_b(&mut self, v: &str, value: f64) -> &mut Self {
        self.b.insert(v.to_string(), value);
        self
    }

    pub fn set_a(&mut self, u: &str, v: &str, value: f64) -> &mut Self {
        self.a.insert(edge_key(u, v), value);
        self
    }

    /// Attaches half-line data at `root`, keying any generator tail by the root name.
    pub fn set_halfline(&mut self, root: &str, mut data: HalfLineData) -> &mut Self {
        data.key = root_key(root);
        self.halflines.insert(root.to_string(), data);
        self
    }

    pub fn b_of(&self, v: &str) -> f64 {
        self.b.get(v).copied().unwrap_or(0.0)
    }

    pub fn a_of(&self, u: &str, v: &str) -> f64 {
        self.a.get(&edge_key(u, v)).copied().unwrap_or(0.0)
    }

    /// Sup of all `|b|` and `|a|`.
    pub fn bound(&self) -> f64 {
        let c = self
            .b
            .values()
            .chain(self.a.values())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        self.halflines.values().fold(c, |m, h| m.max(h.bound()))
    }

    /// Uniform coefficients on `graph`: every `b = b`, every `a = a`, free-type tails.
    pub fn uniform(graph: &StarLikeGraph, a: f64, b: f64) -> Self {
        let mut c = JacobiCoefficients::default();
        for v in &graph.compact {
            c.set_b(v, b);
        }
        for (u, v) in &graph.edges {
            c.set_a(u, v, a);
        }
        for r in &graph.roots {
            c.set_halfline(r, HalfLineData::constant(a, b));
        }
        c
    }

    /// The slice operator `J_k` with the root as origin.
    pub fn slice(&self, root: &str) -> Option<HalfLineOperator> {
        let data = self.halflines.get(root)?;
        Some(HalfLineOperator::new(self.b_of(root), data.clone()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Issue {
    EmptyCompact,
    DuplicateVertex(String),
    UnknownVertex(String),
    SelfLoop(String),
    DuplicateEdge(String, String),
    Disconnected(String),
    NoHalfLines,
    DuplicateRoot(String),
    MissingDiagonal(String),
    MissingWeight(String, String),
    ZeroWeight(String),
    StrayWeight(String, String),
    MissingHalfLine(String),
    StrayHalfLine(String),
    NonFinite(String),
    EmptyPeriod(String),
    SpectralMismatch(String),
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::EmptyCompact => write!(f, "compact component is empty"),
            Issue::DuplicateVertex(v) => write!(f, "vertex {v} listed twice"),
            Issue::UnknownVertex(v) => write!(f, "unknown vertex {v}"),
            Issue::SelfLoop(v) => write!(f, "self-loop at {v}"),
            Issue::DuplicateEdge(u, v) => write!(f, "duplicate edge {u}-{v}"),
            Issue::Disconnected(v) => {
                write!(f, "compact component is disconnected ({v} unreachable)")
            }
            Issue::NoHalfLines => write!(f, "no half-lines attached"),
            Issue::DuplicateRoot(v) => write!(f, "vertex {v} carries more than one half-line"),
            Issue::MissingDiagonal(v) => write!(f, "no diagonal entry for {v}"),
            Issue::MissingWeight(u, v) => write!(f, "no weight for edge {u}-{v}"),
            Issue::ZeroWeight(e) => write!(f, "zero weight on {e}"),
            Issue::StrayWeight(u, v) => write!(f, "weight given for non-edge {u}-{v}"),
            Issue::MissingHalfLine(v) => write!(f, "root {v} has no half-line data"),
            Issue::StrayHalfLine(v) => write!(f, "half-line data for non-root {v}"),
            Issue::NonFinite(what) => write!(f, "non-finite coefficient at {what}"),
            Issue::EmptyPeriod(v) => write!(f, "empty periodic tail on half-line {v}"),
            Issue::SpectralMismatch(v) => {
                write!(
                    f,
                    "diagonal entry at {v} disagrees with its spectral branch"
                )
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let msg: Vec<String> = self.issues.iter().map(|i| i.to_string()).collect();
            Err(Error::InvalidGraph(msg.join("; ")))
        }
    }
}

/// Checks every structural and coefficient invariant, collecting all violations.
pub fn validate(graph: &StarLikeGraph, coeffs: &JacobiCoefficients) -> ValidationReport {
    let mut issues = Vec::new();
    if graph.compact.is_empty() {
        issues.push(Issue::EmptyCompact);
    }
    let mut seen = BTreeSet::new();
    for v in &graph.compact {
        if !seen.insert(v.as_str()) {
            issues.push(Issue::DuplicateVertex(v.clone()));
        }
    }
    let mut edge_seen = BTreeSet::new();
    for (u, v) in &graph.edges {
        for w in [u, v] {
            if !seen.contains(w.as_str()) {
                issues.push(Issue::UnknownVertex(w.clone()));
            }
        }
        if u == v {
            issues.push(Issue::SelfLoop(u.clone()));
        } else if !edge_seen.insert(edge_key(u, v)) {
            issues.push(Issue::DuplicateEdge(u.clone(), v.clone()));
        }
    }
    if let Some(start) = graph.compact.first() {
        let mut reached = BTreeSet::from([start.as_str()]);
        let mut queue = VecDeque::from([start.as_str()]);
        while let Some(x) = queue.pop_front() {
            for y in graph.compact_neighbors(x) {
                if reached.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        for v in &graph.compact {
            if !reached.contains(v.as_str()) {
                issues.push(Issue::Disconnected(v.clone()));
            }
        }
    }
    if graph.roots.is_empty() {
        issues.push(Issue::NoHalfLines);
    }
    let mut root_seen = BTreeSet::new();
    for r in &graph.roots {
        if !seen.contains(r.as_str()) {
            issues.push(Issue::UnknownVertex(r.clone()));
        }
        if !root_seen.insert(r.as_str()) {
            issues.push(Issue::DuplicateRoot(r.clone()));
        }
    }

    for v in &graph.compact {
        match coeffs.b.get(v) {
            None => issues.push(Issue::MissingDiagonal(v.clone())),
            Some(x) if !x.is_finite() => issues.push(Issue::NonFinite(v.clone())),
            _ => {}
        }
    }
    for (u, v) in &graph.edges {
        match coeffs.a.get(&edge_key(u, v)) {
            None => issues.push(Issue::MissingWeight(u.clone(), v.clone())),
            Some(x) if *x == 0.0 => issues.push(Issue::ZeroWeight(format!("{u}-{v}"))),
            Some(x) if !x.is_finite() => issues.push(Issue::NonFinite(format!("{u}-{v}"))),
            _ => {}
        }
    }
    for (u, v) in coeffs.a.keys() {
        if !edge_seen.contains(&(u.clone(), v.clone())) {
            issues.push(Issue::StrayWeight(u.clone(), v.clone()));
        }
    }
    for r in &graph.roots {
        let Some(h) = coeffs.halflines.get(r) else {
            issues.push(Issue::MissingHalfLine(r.clone()));
            continue;
        };
        check_halfline(r, h, &mut issues);
        if let Some(s) = &h.spectral {
            let b = coeffs.b_of(r);
            if (b - s.origin_b).abs() > 1e-12 * (1.0 + b.abs()) {
                issues.push(Issue::SpectralMismatch(r.clone()));
            }
        }
    }
    for r in coeffs.halflines.keys() {
        if !root_seen.contains(r.as_str()) {
            issues.push(Issue::StrayHalfLine(r.clone()));
        }
    }
    ValidationReport { issues }
}

fn check_halfline(r: &str, h: &HalfLineData, issues: &mut Vec<Issue>) {
    for (i, x) in h.a.iter().enumerate() {
        if *x == 0.0 {
            issues.push(Issue::ZeroWeight(format!("{r}: a({i})")));
        } else if !x.is_finite() {
            issues.push(Issue::NonFinite(format!("{r}: a({i})")));
        }
    }
    for (i, x) in h.b.iter().enumerate() {
        if !x.is_finite() {
            issues.push(Issue::NonFinite(format!("{r}: b({})", i + 1)));
        }
    }
    match &h.tail {
        Tail::Constant { a, b } => {
            if *a == 0.0 {
                issues.push(Issue::ZeroWeight(format!("{r}: tail a")));
            }
            if !a.is_finite() || !b.is_finite() {
                issues.push(Issue::NonFinite(format!("{r}: tail")));
            }
        }
        Tail::Periodic { a, b } => {
            if a.is_empty() || b.is_empty() {
                issues.push(Issue::EmptyPeriod(r.to_string()));
            }
            if a.contains(&0.0) {
                issues.push(Issue::ZeroWeight(format!("{r}: periodic a")));
            }
            if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
                issues.push(Issue::NonFinite(format!("{r}: periodic tail")));
            }
        }
        Tail::Generator(g) => {
            if g.min_abs_a() == 0.0 {
                issues.push(Issue::ZeroWeight(format!("{r}: generator a")));
            }
            if !g.bound().is_finite() {
                issues.push(Issue::NonFinite(format!("{r}: generator")));
            }
        }
    }
}

/// Finitely supported function on vertices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vector {
    pub values: BTreeMap<VertexId, Complex64>,
}

impl Vector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn delta(v: VertexId) -> Self {
        let mut x = Self::new();
        x.set(v, Complex64::new(1.0, 0.0));
        x
    }

    pub fn set(&mut self, v: VertexId, value: Complex64) {
        self.values.insert(v, value);
    }

    pub fn get(&self, v: &VertexId) -> Option<Complex64> {
        self.values.get(v).copied()
    }

    /// Value with missing entries read as zero.
    pub fn at(&self, v: &VertexId) -> Complex64 {
        self.get(v).unwrap_or_default()
    }
}

/// Neighbors of `v` together with the connecting weights.
pub fn neighbors(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    v: &VertexId,
) -> Vec<(VertexId, f64)> {
    match v {
        VertexId::Compact(name) => {
            let mut out: Vec<(VertexId, f64)> = graph
                .compact_neighbors(name)
                .map(|w| (VertexId::compact(w), coeffs.a_of(name, w)))
                .collect();
            if let Some(h) = coeffs.halflines.get(name) {
                if graph.has_halfline(name) {
                    out.push((VertexId::site(name, 1), h.a_at(0)));
                }
            }
            out
        }
        VertexId::HalfLine { root, index } => {
            let h = &coeffs.halflines[root];
            let prev = if *index == 1 {
                VertexId::compact(root)
            } else {
                VertexId::site(root, index - 1)
            };
            vec![
                (prev, h.a_at(index - 1)),
                (VertexId::site(root, index + 1), h.a_at(*index)),
            ]
        }
    }
}

pub fn diagonal(coeffs: &JacobiCoefficients, v: &VertexId) -> f64 {
    match v {
        VertexId::Compact(name) => coeffs.b_of(name),
        VertexId::HalfLine { root, index } => coeffs.halflines[root].b_at(*index),
    }
}

/// `(J phi)(u)` for each `u` in `window`; `phi` must be defined on the window's
/// closed neighborhood.
pub fn apply_operator(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    phi: &Vector,
    window: &[VertexId],
) -> Result<Vector> {
    let mut out = Vector::new();
    for u in window {
        let at = |w: &VertexId| {
            phi.get(w)
                .ok_or_else(|| Error::UndefinedVertex(w.to_string()))
        };
        let mut acc = at(u)? * diagonal(coeffs, u);
        for (w, a) in neighbors(graph, coeffs, u) {
            acc += at(&w)? * a;
        }
        out.set(u.clone(), acc);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Truncation {
    pub matrix: DMatrix<f64>,
    pub order: Vec<VertexId>,
}

/// Vertex ordering of the finite section: compact vertices first, then each half-line's
/// first `depth` sites in root order.
pub fn truncation_order(graph: &StarLikeGraph, depth: usize) -> Vec<VertexId> {
    let mut order: Vec<VertexId> = graph.compact.iter().map(|c| VertexId::compact(c)).collect();
    for r in &graph.roots {
        order.extend((1..=depth).map(|i| VertexId::site(r, i)));
    }
    order
}

/// Nonzero entries `(i, j, value)` with `i <= j` of the finite section, in `order` indexing.
pub fn truncation_entries(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    order: &[VertexId],
) -> Vec<(usize, usize, f64)> {
    let pos: HashMap<&VertexId, usize> = order.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut out = Vec::new();
    for (i, v) in order.iter().enumerate() {
        out.push((i, i, diagonal(coeffs, v)));
        for (w, a) in neighbors(graph, coeffs, v) {
            if let Some(&j) = pos.get(&w) {
                if i < j {
                    out.push((i, j, a));
                }
            }
        }
    }
    out
}

/// Dense finite section `P J P` onto the compact part and `depth` sites per half-line.
pub fn truncate(graph: &StarLikeGraph, coeffs: &JacobiCoefficients, depth: usize) -> Truncation {
    let order = truncation_order(graph, depth);
    let n = order.len();
    let mut matrix = DMatrix::zeros(n, n);
    for (i, j, x) in truncation_entries(graph, coeffs, &order) {
        matrix[(i, j)] = x;
        matrix[(j, i)] = x;
    }
    Truncation { matrix, order }
}

/// `A_ij = a_(v_i, v_j)` on compact edges, zero elsewhere.
pub fn compact_adjacency(graph: &StarLikeGraph, coeffs: &JacobiCoefficients) -> DMatrix<f64> {
    let n = graph.n();
    let mut a = DMatrix::zeros(n, n);
    for (u, v) in &graph.edges {
        if let (Some(i), Some(j)) = (graph.index_of(u), graph.index_of(v)) {
            let w = coeffs.a_of(u, v);
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
    }
    a
}

/// Moves the first `p` sites of every half-line into the compact part. Absorbed sites of
/// root `r` are named `r~1, ..., r~p`; the half-line then hangs off `r~p`.
pub fn absorb(
    graph: &StarLikeGraph,
    coeffs: &JacobiCoefficients,
    p: usize,
) -> (StarLikeGraph, JacobiCoefficients) {
    if p == 0 {
        return (graph.clone(), coeffs.clone());
    }
    let mut g = StarLikeGraph {
        compact: graph.compact.clone(),
        edges: graph.edges.clone(),
        roots: Vec::new(),
    };
    let mut c = JacobiCoefficients {
        b: coeffs.b.clone(),
        a: coeffs.a.clone(),
        halflines: BTreeMap::new(),
    };
    for r in &graph.roots {
        let h = &coeffs.halflines[r];
        let mut prev = r.clone();
        for i in 1..=p {
            let name = format!("{r}~{i}");
            g.compact.push(name.clone());
            g.edges.push((prev.clone(), name.clone()));
            c.set_b(&name, h.b_at(i));
            c.set_a(&prev, &name, h.a_at(i - 1));
            prev = name;
        }
        g.roots.push(prev.clone());
        let mut tail = h.advance(p);
        tail.key = h.key;
        c.halflines.insert(prev, tail);
    }
    (g, c)
}

/// Canonical test graphs.
pub mod shapes {
    use super::*;

    /// `N`: one compact vertex carrying a free half-line.
    pub fn half_line() -> (StarLikeGraph, JacobiCoefficients) {
        let g = StarLikeGraph::new(&["v"], &[], &["v"]);
        let c = JacobiCoefficients::uniform(&g, 1.0, 0.0);
        (g, c)
    }

    /// `Z`: two adjacent compact vertices, each with a free half-line.
    pub fn line() -> (StarLikeGraph, JacobiCoefficients) {
        let g = StarLikeGraph::new(&["l", "r"], &[("l", "r")], &["l", "r"]);
        let c = JacobiCoefficients::uniform(&g, 1.0, 0.0);
        (g, c)
    }

    /// Triangle with a free half-line at every corner.
    pub fn triangle() -> (StarLikeGraph, JacobiCoefficients) {
        let g = StarLikeGraph::new(
            &["v1", "v2", "v3"],
            &[("v1", "v2"), ("v2", "v3"), ("v1", "v3")],
            &["v1", "v2", "v3"],
        );
        let c = JacobiCoefficients::uniform(&g, 1.0, 0.0);
        (g, c)
    }

    /// Star `K_{1,n}` whose leaves carry free half-lines; the center `c` has none.
    pub fn star(n: usize) -> (StarLikeGraph, JacobiCoefficients) {
        let leaves: Vec<String> = (1..=n).map(|i| format!("l{i}")).collect();
        let mut compact = vec!["c".to_string()];
        compact.extend(leaves.iter().cloned());
        let g = StarLikeGraph {
            compact,
            edges: leaves
                .iter()
                .map(|l| ("c".to_string(), l.clone()))
                .collect(),
            roots: leaves,
        };
        let c = JacobiCoefficients::uniform(&g, 1.0, 0.0);
        (g, c)
    }
}
