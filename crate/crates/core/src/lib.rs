//! Discretized semilinear equations `Au = f(x, u) + y` with `A` the
//! Dirichlet Laplacian on a box.
//!
//! The crate checks sufficient conditions for existence and uniqueness of a
//! solution ([`certify`]), solves by damped Gauss-Newton ([`solve`]) and
//! probes uniqueness by multistart ([`probe`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod config;
pub mod error;
pub mod expr;
pub mod grid;
pub mod laplacian;
pub mod nemytskii;
pub mod operators;
pub mod probe;
pub mod problem;
pub mod report;
pub mod solve;
pub mod study;

pub use certify::{certify, CertifySettings, GrowthSpec, HypothesisCertificate, Provenance, Verdict};
pub use config::{load_config, parse_config, FieldKind, ProblemConfig};
pub use error::{Error, Result};
pub use expr::{parse, Binding, Expr};
pub use grid::{GridDomain, GridField};
pub use laplacian::{build_laplacian, embedding_constant, poincare_constant, EmbeddingConstant, EmbeddingSample};
pub use nemytskii::{Nonlinearity, URange};
pub use operators::{graph_norm, smallest_eigenvalue, solve_spd, CsrMatrix, DiscreteOperator, LinearOperator};
pub use probe::{multistart, ProbeOptions, UniquenessReport, UniquenessVerdict};
pub use problem::Problem;
pub use report::{Command, Report};
pub use solve::{gauss_newton_solve, grad_phi, phi, residual, SolveGuard, SolveOptions, SolveReport, SolveVerdict};
pub use study::{refinement_study, StudyReport};
