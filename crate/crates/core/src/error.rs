use thiserror::Error;

use crate::certify::Verdict;
use crate::expr::{DiffError, EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Diff(#[from] DiffError),

    #[error("{source} at node {node} (x = {coords:?}, u = {u})")]
    Domain { node: usize, coords: [f64; 3], u: f64, source: EvalError },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("grid mismatch: expected {expected} nodes, found {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("non-finite value at node {node}")]
    NonFiniteField { node: usize },

    #[error(
        "conjugate gradients did not converge in {iterations} iterations (relative residual {relative_residual:e})"
    )]
    CgNotConverged { iterations: usize, relative_residual: f64 },

    #[error("inverse power iteration did not converge in {iterations} iterations")]
    EigenNotConverged { iterations: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("growth bound: {0}")]
    Growth(String),

    #[error("refusing to solve: certificate verdict is {0}")]
    Uncertified(Verdict),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
