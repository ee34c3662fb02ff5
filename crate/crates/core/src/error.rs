use thiserror::Error;

use crate::graph::Edge;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("node {node} out of range for a graph on {p} nodes")]
    InvalidNode { node: usize, p: usize },

    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),

    #[error("duplicate edge ({}, {})", .0.lo(), .0.hi())]
    DuplicateEdge(Edge),

    #[error("edge set contains a cycle through ({}, {})", .0.lo(), .0.hi())]
    Cycle(Edge),

    #[error("not a spanning tree: {0}")]
    NotSpanning(String),

    #[error("node count {0} exceeds the structural limit")]
    TooManyNodes(usize),

    #[error("brute-force enumeration refused for p = {p} (limit {limit})")]
    EnumerationTooLarge { p: usize, limit: usize },

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node-count mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("coupling bound violated on edge ({}, {}): theta = {theta}", .edge.lo(), .edge.hi())]
    CouplingOutOfBounds { edge: Edge, theta: f64 },

    #[error("invalid spin value {0} (expected -1 or +1)")]
    InvalidSpin(i64),

    #[error("empty sample matrix")]
    EmptySamples,

    #[error("edge ({}, {}) is not on the path between {u} and {v}", .edge.lo(), .edge.hi())]
    EdgeNotOnPath { edge: Edge, u: usize, v: usize },

    #[error("node {0} is part of the conditioning set")]
    NodeInConditioningSet(usize),

    #[error("two-trees counterexample: {0}")]
    Counterexample(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
