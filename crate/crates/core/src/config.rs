//! JSON problem configuration: parsing, validation and conversion into the
//! discrete problem.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "domain": { "dimension": 3, "lower": [1, 1, 1], "upper": [2, 2, 2], "nodes": [11, 11, 11] },
//!   "nonlinearity": {
//!     "f": "(1 - 1/(x^2+y^2+z^2))*(10*u - 1)",
//!     "u_range": [-10, 10],
//!     "growth": { "mode": "asserted", "a1": "11/12", "b1": "110/12" },
//!     "b3": 9.166666666666667
//!   },
//!   "rhs": "zero",
//!   "probe": { "starts": 10, "seed": 42, "amplitude": 50 }
//! }
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::certify::{CertifySettings, GrowthSpec};
use crate::error::{Error, Result};
use crate::expr::{parse, Binding, EvalError, Expr, Var};
use crate::grid::{GridDomain, GridField};
use crate::laplacian::EmbeddingSample;
use crate::nemytskii::{check_variables, URange};
use crate::probe::ProbeOptions;
use crate::problem::{rhs_field, Problem};
use crate::solve::SolveOptions;

pub const SCHEMA_VERSION: u32 = 1;

/// Lattice points per axis used to look for singularities on the closed box.
/// Odd, so the centre and the corners are included.
const SINGULARITY_LATTICE: usize = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub schema: u32,
    pub domain: DomainConfig,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default = "zero_rhs")]
    pub rhs: String,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub probe: ProbeOptions,
    #[serde(default)]
    pub certificate: CertificateConfig,
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dimension: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Interior nodes per axis.
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub f: String,
    #[serde(default = "default_u_range")]
    pub u_range: [f64; 2],
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub growth: GrowthConfig,
    /// Asserted bound `f_u <= b3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum GrowthConfig {
    #[default]
    Auto,
    Sampled,
    Asserted {
        a1: String,
        b1: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertificateConfig {
    pub margin: f64,
    /// Restrict the embedding-constant solves to these flat node indices.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_nodes: Option<Vec<usize>>,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        CertificateConfig { margin: 1e-9, embedding_nodes: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Number of grids; level `k` has `(n + 1) 2^k - 1` nodes per axis.
    pub levels: usize,
    /// Continuum solution in `x, y, z` to measure errors against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig { levels: 3, exact: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Solution,
    Rhs,
    Residual,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Solution => "solution",
            FieldKind::Rhs => "rhs",
            FieldKind::Residual => "residual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub fields: Vec<FieldKind>,
}

fn zero_rhs() -> String {
    "zero".into()
}

fn default_u_range() -> [f64; 2] {
    [-10.0, 10.0]
}

fn default_samples() -> usize {
    21
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ProblemConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Parses and validates a configuration document, reporting every problem
/// found.
pub fn parse_config(text: &str) -> Result<ProblemConfig> {
    let config: ProblemConfig = serde_json::from_str(text)?;
    let problems = config.validate();
    if problems.is_empty() {
        Ok(config)
    } else {
        Err(Error::Config(problems))
    }
}

impl ProblemConfig {
    /// Every validation problem, empty when the configuration is usable.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.schema != SCHEMA_VERSION {
            problems.push(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema));
        }

        let d = &self.domain;
        let dim_ok = (1..=3).contains(&d.dimension);
        if !dim_ok {
            problems.push(format!("domain.dimension must be 1, 2 or 3, got {}", d.dimension));
        }
        for (name, len) in [("lower", d.lower.len()), ("upper", d.upper.len()), ("nodes", d.nodes.len())] {
            if len != d.dimension {
                problems.push(format!("domain.{name} has {len} entries but dimension is {}", d.dimension));
            }
        }
        let grid = if dim_ok && problems.is_empty() {
            match GridDomain::new(d.lower.clone(), d.upper.clone(), d.nodes.clone()) {
                Ok(g) => Some(g),
                Err(e) => {
                    problems.push(e.to_string());
                    None
                }
            }
        } else {
            None
        };

        let [lo, hi] = self.nonlinearity.u_range;
        let range = match URange::new(lo, hi) {
            Ok(r) => Some(r),
            Err(e) => {
                problems.push(format!("nonlinearity.u_range: {e}"));
                None
            }
        };
        if self.nonlinearity.samples < 2 {
            problems.push("nonlinearity.samples must be at least 2".into());
        }
        if let Some(b3) = self.nonlinearity.b3 {
            if !b3.is_finite() {
                problems.push("nonlinearity.b3 must be finite".into());
            }
        }
        if !(self.certificate.margin >= 0.0 && self.certificate.margin < 1.0) {
            problems.push(format!("certificate.margin {} outside [0, 1)", self.certificate.margin));
        }
        if self.study.levels < 1 {
            problems.push("study.levels must be at least 1".into());
        }
        for result in [self.solver.validate(), self.probe.validate()] {
            if let Err(Error::Config(list)) = result {
                problems.extend(list.into_iter().map(|p| format!("solver/probe: {p}")));
            }
        }

        let dim = d.dimension;
        let mut checked = Vec::new();
        let expression = |problems: &mut Vec<String>, label: &str, text: &str, allow_u: bool| -> Option<Expr> {
            let e = match parse(text) {
                Ok(e) => e,
                Err(err) => {
                    problems.push(format!("{label}: {err}"));
                    return None;
                }
            };
            if let Err(err) = check_variables(&e, dim.clamp(1, 3), allow_u) {
                problems.push(format!("{label}: {err}"));
                return None;
            }
            Some(e)
        };

        if let Some(f) = expression(&mut problems, "nonlinearity.f", &self.nonlinearity.f, true) {
            match f.differentiate_u() {
                Ok(fu) => {
                    checked.push(("nonlinearity.f", f, true));
                    checked.push(("derivative of nonlinearity.f", fu, true));
                }
                Err(err) => problems.push(format!("nonlinearity.f: {err}")),
            }
        }
        if !self.rhs_is_zero() {
            if let Some(e) = expression(&mut problems, "rhs", &self.rhs, false) {
                checked.push(("rhs", e, false));
            }
        }
        if let GrowthConfig::Asserted { a1, b1 } = &self.nonlinearity.growth {
            for (label, text) in [("nonlinearity.growth.a1", a1), ("nonlinearity.growth.b1", b1)] {
                if let Some(e) = expression(&mut problems, label, text, false) {
                    checked.push((label, e, false));
                }
            }
        }
        if let Some(text) = &self.study.exact {
            if let Some(e) = expression(&mut problems, "study.exact", text, false) {
                checked.push(("study.exact", e, false));
            }
        }

        if let (Some(grid), Some(range)) = (&grid, range) {
            let us = [range.min, 0.5 * (range.min + range.max), range.max];
            for (label, e, uses_u) in &checked {
                let us: &[f64] = if *uses_u && e.contains(Var::U) { &us } else { &[0.0] };
                if let Some((point, u, err)) = find_singularity(e, grid, us) {
                    problems.push(format!(
                        "{label} is singular on the closed domain at x = {:?}{}: {err}",
                        &point[..grid.dim()],
                        if *uses_u { format!(", u = {u}") } else { String::new() }
                    ));
                }
            }
        }
        problems
    }

    pub fn rhs_is_zero(&self) -> bool {
        matches!(self.rhs.trim(), "zero" | "0")
    }

    pub fn grid(&self) -> Result<GridDomain> {
        let d = &self.domain;
        GridDomain::new(d.lower.clone(), d.upper.clone(), d.nodes.clone())
    }

    pub fn u_range(&self) -> Result<URange> {
        URange::new(self.nonlinearity.u_range[0], self.nonlinearity.u_range[1])
    }

    /// The discrete problem on the configured grid.
    pub fn problem(&self) -> Result<Problem> {
        self.problem_on(self.grid()?)
    }

    /// The discrete problem on another grid (used by refinement studies).
    pub fn problem_on(&self, grid: GridDomain) -> Result<Problem> {
        let rhs = if self.rhs_is_zero() { None } else { Some(self.rhs.as_str()) };
        Problem::laplacian(grid, &self.nonlinearity.f, self.u_range()?, self.nonlinearity.samples, rhs)
    }

    /// The configured exact solution sampled at the nodes of `domain`.
    pub fn exact_field(&self, domain: Arc<GridDomain>) -> Result<Option<GridField>> {
        self.study.exact.as_deref().map(|text| rhs_field(text, domain)).transpose()
    }

    pub fn certify_settings(&self) -> Result<CertifySettings> {
        let growth = match &self.nonlinearity.growth {
            GrowthConfig::Auto => GrowthSpec::Auto,
            GrowthConfig::Sampled => GrowthSpec::Sampled,
            GrowthConfig::Asserted { a1, b1 } => GrowthSpec::Asserted { a1: parse(a1)?, b1: parse(b1)? },
        };
        let embedding = match &self.certificate.embedding_nodes {
            None => EmbeddingSample::All,
            Some(nodes) => EmbeddingSample::Nodes(nodes.clone()),
        };
        Ok(CertifySettings {
            u_range: self.u_range()?,
            samples: self.nonlinearity.samples,
            asserted_b3: self.nonlinearity.b3,
            growth,
            margin: self.certificate.margin,
            embedding,
        })
    }
}

/// First lattice point of the closed box (and sampled `u`) where `e` fails
/// to evaluate.
fn find_singularity(e: &Expr, grid: &GridDomain, us: &[f64]) -> Option<([f64; 3], f64, EvalError)> {
    let dim = grid.dim();
    let k = SINGULARITY_LATTICE;
    let total = k.pow(dim as u32);
    for flat in 0..total {
        let mut point = [0.0; 3];
        let mut rest = flat;
        for axis in (0..dim).rev() {
            let i = rest % k;
            rest /= k;
            let (lo, hi) = (grid.lower()[axis], grid.upper()[axis]);
            point[axis] = if i + 1 == k { hi } else { lo + (hi - lo) * i as f64 / (k - 1) as f64 };
        }
        for &u in us {
            if let Err(err) = e.evaluate(&Binding::at(point, u)) {
                return Some((point, u, err));
            }
        }
    }
    None
}
