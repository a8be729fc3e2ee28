//! Text form of a graph with its coefficients.
//!
//! ```toml
//! [[graph.compact]]
//! id = "c"
//! b = 0.0
//!
//! [[graph.compact]]
//! id = "l1"
//! b = 0.0
//!
//! [[graph.edges]]
//! u = "c"
//! v = "l1"
//! a = 1.0
//!
//! [halflines.l1]
//! a = [1.0, 0.5]        # a(0) (root to first site), a(1), ...
//! b = [0.2]             # b(1), b(2), ...
//! tail = { kind = "constant", a = 1.0, b = 0.0 }
//! ```
//!
//! Tails are `constant { a, b }`, `periodic { a = [..], b = [..] }` or
//! `generator { name = "random" | "almost-mathieu", .. }`. Instead of coefficients a
//! half-line may name a probability measure:
//!
//! ```toml
//! [halflines.v1.measure]
//! atoms = [[0.0, 0.5]]
//! density = { kind = "uniform", lo = 0.0, hi = 1.0 }
//! depth = 4096
//! theta = 0.7853981633974483
//! ```
//!
//! The branch is then the Jacobi matrix of the measure, seen through the boundary angle
//! `theta`, and the root's `b` may be omitted (it is implied).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{JacobiCoefficients, StarLikeGraph};
use crate::measure::{measure_branch, MeasureSpec};
use crate::sequence::{Generator, HalfLineData, Tail};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub u: String,
    pub v: String,
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub compact: Vec<VertexConfig>,
    #[serde(default)]
    pub edges: Vec<EdgeConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TailConfig {
    Constant { a: f64, b: f64 },
    Periodic { a: Vec<f64>, b: Vec<f64> },
    Generator(Generator),
}

fn default_depth() -> usize {
    4096
}

fn default_theta() -> f64 {
    std::f64::consts::FRAC_PI_4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureBranchConfig {
    #[serde(flatten)]
    pub spec: MeasureSpec,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfLineConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureBranchConfig>,
}

/// A graph and its coefficients, as written in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub graph: GraphSection,
    #[serde(default)]
    pub halflines: BTreeMap<String, HalfLineConfig>,
}

impl ModelConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Builds and validates the graph and coefficients.
    pub fn build(&self) -> Result<(StarLikeGraph, JacobiCoefficients)> {
        let compact: Vec<String> = self.graph.compact.iter().map(|v| v.id.clone()).collect();
        let edges: Vec<(String, String)> = self
            .graph
            .edges
            .iter()
            .map(|e| (e.u.clone(), e.v.clone()))
            .collect();
        let mut roots: Vec<String> = compact
            .iter()
            .filter(|v| self.halflines.contains_key(*v))
            .cloned()
            .collect();
        // stray half-lines are reported by validation
        roots.extend(
            self.halflines
                .keys()
                .filter(|r| !compact.contains(r))
                .cloned(),
        );
        let graph = StarLikeGraph {
            compact,
            edges,
            roots,
        };

        let mut coeffs = JacobiCoefficients::default();
        for v in &self.graph.compact {
            if let Some(b) = v.b {
                coeffs.set_b(&v.id, b);
            }
        }
        for e in &self.graph.edges {
            coeffs.set_a(&e.u, &e.v, e.a);
        }
        for (root, h) in &self.halflines {
            match (&h.measure, &h.tail) {
                (Some(m), None) if h.a.is_empty() && h.b.is_empty() => {
                    let (b, data) = measure_branch(&m.spec, m.depth, m.theta)?;
                    let given = self
                        .graph
                        .compact
                        .iter()
                        .find(|v| &v.id == root)
                        .and_then(|v| v.b);
                    if given.is_none() {
                        coeffs.set_b(root, b);
                    }
                    coeffs.set_halfline(root, data);
                }
                (Some(_), _) => {
                    return Err(Error::Config(format!(
                        "half-line {root}: a measure excludes explicit coefficients and tails"
                    )))
                }
                (None, Some(t)) => {
                    let tail = match t {
                        TailConfig::Constant { a, b } => Tail::Constant { a: *a, b: *b },
                        TailConfig::Periodic { a, b } => Tail::Periodic {
                            a: a.clone(),
                            b: b.clone(),
                        },
                        TailConfig::Generator(g) => Tail::Generator(g.clone()),
                    };
                    coeffs.set_halfline(root, HalfLineData::new(h.a.clone(), h.b.clone(), tail));
                }
                (None, None) => {
                    return Err(Error::Config(format!(
                        "half-line {root}: needs a tail or a measure"
                    )))
                }
            }
        }
        crate::graph::validate(&graph, &coeffs).into_result()?;
        Ok((graph, coeffs))
    }

    /// Config for a coefficient-defined model. Measure-derived branches have no
    /// coefficient form that keeps their exact boundary values, so they are refused.
    pub fn from_model(graph: &StarLikeGraph, coeffs: &JacobiCoefficients) -> Result<Self> {
        let compact = graph
            .compact
            .iter()
            .map(|v| VertexConfig {
                id: v.clone(),
                b: Some(coeffs.b_of(v)),
            })
            .collect();
        let edges = graph
            .edges
            .iter()
            .map(|(u, v)| EdgeConfig {
                u: u.clone(),
                v: v.clone(),
                a: coeffs.a_of(u, v),
            })
            .collect();
        let mut halflines = BTreeMap::new();
        for r in &graph.roots {
            let h = coeffs
                .halflines
                .get(r)
                .ok_or_else(|| Error::Config(format!("no half-line data at {r}")))?;
            if h.spectral.is_some() || h.offset != 0 {
                return Err(Error::Config(format!(
                    "half-line {r} is measure-derived or shifted"
                )));
            }
            let tail = match &h.tail {
                Tail::Constant { a, b } => TailConfig::Constant { a: *a, b: *b },
                Tail::Periodic { a, b } => TailConfig::Periodic {
                    a: a.clone(),
                    b: b.clone(),
                },
                Tail::Generator(g) => TailConfig::Generator(g.clone()),
            };
            halflines.insert(
                r.clone(),
                HalfLineConfig {
                    a: h.a.clone(),
                    b: h.b.clone(),
                    tail: Some(tail),
                    measure: None,
                },
            );
        }
        Ok(ModelConfig {
            graph: GraphSection { compact, edges },
            halflines,
        })
    }
}

/// Reads a model config file.
pub fn load(path: &std::path::Path) -> Result<ModelConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ModelConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::shapes;

    const STAR: &str = r#"
[[graph.compact]]
id = "c"
b = 0.0

[[graph.compact]]
id = "l1"
b = 0.5

[[graph.compact]]
id = "l2"
b = -0.5

[[graph.edges]]
u = "c"
v = "l1"
a = 1.0

[[graph.edges]]
u = "c"
v = "l2"
a = 0.7

[halflines.l1]
a = [1.0, 0.5]
b = [0.2]
tail = { kind = "constant", a = 1.0, b = 0.0 }

[halflines.l2]
tail = { kind = "generator", name = "random", seed = 7, b_min = -1.0, b_max = 1.0, a_min = 0.5, a_max = 1.5 }
"#;

    #[test]
    fn parses_and_builds() {
        let c = ModelConfig::from_toml_str(STAR).unwrap();
        let (g, k) = c.build().unwrap();
        assert_eq!(g.roots, vec!["l1", "l2"]);
        assert_eq!(k.a_of("l2", "c"), 0.7);
        assert_eq!(k.halflines["l1"].a_at(1), 0.5);
        assert_eq!(k.halflines["l1"].b_at(2), 0.0);
    }

    #[test]
    fn roundtrip_is_lossless() {
        let c = ModelConfig::from_toml_str(STAR).unwrap();
        let text = c.to_toml_string().unwrap();
        assert_eq!(ModelConfig::from_toml_str(&text).unwrap(), c);
        let (g, k) = shapes::star(3);
        let c = ModelConfig::from_model(&g, &k).unwrap();
        let (g2, k2) = ModelConfig::from_toml_str(&c.to_toml_string().unwrap())
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(g2, g);
        assert_eq!(k2.b, k.b);
        assert_eq!(k2.a, k.a);
    }

    #[test]
    fn measure_branch_fills_root_diagonal() {
        let text = r#"
[[graph.compact]]
id = "v"

[halflines.v.measure]
atoms = [[0.0, 0.5]]
density = { kind = "uniform", lo = 0.0, hi = 1.0 }
depth = 64
"#;
        let c = ModelConfig::from_toml_str(text).unwrap();
        let (_, k) = c.build().unwrap();
        assert!(k.halflines["v"].spectral.is_some());
        assert!(
            (k.b_of("v") - (0.25 + 1.0)).abs() < 1e-12,
            "{}",
            k.b_of("v")
        );
        let again = ModelConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn errors_are_config_errors() {
        assert!(matches!(
            ModelConfig::from_toml_str("graph = 3"),
            Err(Error::Config(_))
        ));
        let text = "[[graph.compact]]\nid = \"v\"\nb = 0.0\n[halflines.v]\n";
        assert!(matches!(
            ModelConfig::from_toml_str(text).unwrap().build(),
            Err(Error::Config(_))
        ));
    }
}
