//! Learning and evaluating tree-structured zero-field Ising models.
//!
//! The crate covers the whole pipeline: building models on trees and forests,
//! exact ancestral sampling, empirical correlations, the Chow-Liu and
//! truncation learners, small-set total-variation losses with exact tree
//! inference, and checkers for the concentration events and combinatorial
//! facts the learners rely on.
//!
//! ```
//! use tree_ising::{learners, sampling, TreeIsingModel};
//!
//! let truth = TreeIsingModel::from_correlations(3, &[(0, 1, 0.5), (1, 2, 0.8)])?;
//! let samples = sampling::sample(&truth, 20_000, sampling::SeedSpec::new(7, 0))?;
//! let fitted = learners::fit(&samples, learners::Method::ChowLiu, None)?;
//! assert_eq!(fitted.model.edges(), truth.edges());
//! # Ok::<(), tree_ising::Error>(())
//! ```

pub mod brute;
pub mod correlation;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod graph;
pub mod harness;
pub mod learners;
pub mod model;
pub mod sampling;
pub mod union_find;
pub mod verification;

pub use correlation::CorrelationMatrix;
pub use error::{Error, Result};
pub use graph::{Edge, Forest, Tree};
pub use model::TreeIsingModel;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
