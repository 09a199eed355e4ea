//! Weighted graphs, lazy random walks and the measurements used to study how
//! mixing times react to small perturbations of the edge weights.

pub mod construction;
pub mod electrical;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod kernel;
pub mod linalg;
pub mod mixing;
pub mod numeric;
pub mod report;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{Distribution, Edge, VertexSet, WeightedGraph};
pub use kernel::{KernelKind, TransitionKernel};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/mixing.md")]
    mod mixing {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/electrical.md")]
    mod electrical {}
    #[doc = include_str!("../../../book/src/family.md")]
    mod family {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
