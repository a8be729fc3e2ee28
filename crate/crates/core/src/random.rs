//! Random models for property checks and the self test.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{JacobiCoefficients, StarLikeGraph};
use crate::mmatrix::{assemble, direct_oracle};
use crate::sequence::{HalfLineData, Tail};
use crate::Result;

/// Uniform in `[-2, 2]` with `|x| >= 0.1`.
pub fn hopping(rng: &mut impl Rng) -> f64 {
    let x: f64 = rng.random_range(0.1..=2.0);
    if rng.random_bool(0.5) {
        x
    } else {
        -x
    }
}

pub fn diagonal(rng: &mut impl Rng) -> f64 {
    rng.random_range(-2.0..=2.0)
}

/// Short random prefix followed by a constant tail.
pub fn halfline(rng: &mut impl Rng) -> HalfLineData {
    let p = rng.random_range(0..=3);
    let a = (0..p).map(|_| hopping(rng)).collect();
    let b = (0..p).map(|_| diagonal(rng)).collect();
    HalfLineData::new(
        a,
        b,
        Tail::Constant {
            a: hopping(rng),
            b: diagonal(rng),
        },
    )
}

/// Connected graph on `1..=max_n` compact vertices (a random tree plus extra edges) with
/// `1..=max_k` half-lines at distinct vertices.
pub fn starlike(
    rng: &mut impl Rng,
    max_n: usize,
    max_k: usize,
) -> (StarLikeGraph, JacobiCoefficients) {
    let n = rng.random_range(1..=max_n);
    let compact: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((compact[rng.random_range(0..i)].clone(), compact[i].clone()));
    }
    for i in 0..n {
        for j in i + 1..n {
            let present = edges.iter().any(|(u, v)| {
                (u == &compact[i] && v == &compact[j]) || (u == &compact[j] && v == &compact[i])
            });
            if !present && rng.random_bool(0.3) {
                edges.push((compact[i].clone(), compact[j].clone()));
            }
        }
    }
    let k = rng.random_range(1..=max_k.min(n));
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        order.swap(i, j);
    }
    let mut picked: Vec<usize> = order[..k].to_vec();
    picked.sort_unstable();
    let roots = picked.iter().map(|&i| compact[i].clone()).collect();
    let graph = StarLikeGraph {
        compact,
        edges,
        roots,
    };
    let mut coeffs = JacobiCoefficients::default();
    for v in &graph.compact {
        coeffs.set_b(v, diagonal(rng));
    }
    for (u, v) in &graph.edges {
        coeffs.set_a(u, v, hopping(rng));
    }
    for r in &graph.roots {
        coeffs.set_halfline(r, halfline(rng));
    }
    (graph, coeffs)
}

/// A path of `2..=max_n` compact vertices with a half-line at each end, so the whole
/// graph is a copy of `Z`.
pub fn z_type(rng: &mut impl Rng, max_n: usize) -> (StarLikeGraph, JacobiCoefficients) {
    let n = rng.random_range(2..=max_n.max(2));
    let compact: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let edges = compact
        .windows(2)
        .map(|w| (w[0].clone(), w[1].clone()))
        .collect();
    let roots = vec![compact[0].clone(), compact[n - 1].clone()];
    let graph = StarLikeGraph {
        compact,
        edges,
        roots,
    };
    let mut coeffs = JacobiCoefficients::default();
    for v in &graph.compact {
        coeffs.set_b(v, diagonal(rng));
    }
    for (u, v) in &graph.edges {
        coeffs.set_a(u, v, hopping(rng));
    }
    for r in &graph.roots {
        coeffs.set_halfline(r, halfline(rng));
    }
    (graph, coeffs)
}

/// `Re z` in `[-3, 3]`, `Im z` in `[im_min, im_max]`.
pub fn spectral_parameter(rng: &mut impl Rng, im_min: f64, im_max: f64) -> Complex64 {
    Complex64::new(
        rng.random_range(-3.0..=3.0),
        rng.random_range(im_min..=im_max),
    )
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchurCase {
    pub graph: usize,
    pub n: usize,
    pub k: usize,
    pub z: Complex64,
    /// Max-norm distance between the assembled `M(z)` and the finite-section oracle.
    pub error: f64,
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Compares `assemble` with `direct_oracle` on `graphs` random graphs at `per_graph`
/// random points each. Deterministic in `seed`.
pub fn schur_suite(seed: u64, graphs: usize, per_graph: usize) -> Result<Vec<SchurCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(graphs * per_graph);
    for gi in 0..graphs {
        let (g, c) = starlike(&mut rng, 6, 4);
        for _ in 0..per_graph {
            let z = spectral_parameter(&mut rng, 0.1, 2.0);
            let m = assemble(&g, &c, z)?;
            let d = direct_oracle(&g, &c, z, 64)?;
            cases.push(SchurCase {
                graph: gi,
                n: g.n(),
                k: g.k(),
                z,
                error: max_abs(&(&m.entries - d)),
            });
        }
    }
    Ok(cases)
}
