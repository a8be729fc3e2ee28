pub mod boundary;
pub mod classification;
pub mod config;
pub mod error;
pub mod graph;
pub mod halfline;
pub mod linalg;
pub mod measure;
pub mod mfunction;
pub mod mmatrix;
pub mod multiplicity;
pub mod random;
pub mod sequence;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/halflines.md")]
    mod halflines {}
    #[doc = include_str!("../../../book/src/mmatrix.md")]
    mod mmatrix {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/multiplicity.md")]
    mod multiplicity {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
}
