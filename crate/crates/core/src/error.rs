use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "continued fraction did not converge by depth {depth} (last {last}, previous {previous})"
    )]
    NonConvergence {
        depth: usize,
        last: Complex64,
        previous: Complex64,
    },

    #[error("direct resolvent did not converge by depth {depth} (change {change:e})")]
    OracleNonConvergence { depth: usize, change: f64 },

    #[error("K(z) is numerically singular (condition number {condition:e})")]
    SingularK { condition: f64 },

    #[error("solution computed to {have} entries, {need} required")]
    InsufficientLength { have: usize, need: usize },

    #[error("vector undefined at {0}")]
    UndefinedVertex(String),

    #[error("no valid pivot: every diagonal entry of M vanishes at the smallest epsilon")]
    NoPivot,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
