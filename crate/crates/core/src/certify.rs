//! Estimates of the constants in the existence-and-uniqueness hypotheses and
//! the certificate that records them.
//!
//! The checked conditions are
//!
//! * (A2) `<Au, u> >= α |u|²` with `α > 0`,
//! * (N1) `N` is C¹ with symmetric `N'(u)`,
//! * (N2i) `|N(u)| <= β |Au| + δ` with `β < 1`,
//! * (N2ii) `<N'(u)h, h> <= γ |h|²` with `γ < α`,
//! * (P3) `f_u(x, u) <= b₃` with `b₃ < α` (node-wise form of N2ii).
//!
//! Every constant carries a [`Provenance`]. Anything sampled caps the
//! verdict at [`Verdict::PassSampled`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Binding, Expr};
use crate::grid::GridField;
use crate::laplacian::{embedding_constant, poincare_constant, EmbeddingConstant, EmbeddingSample};
use crate::nemytskii::{check_variables, Nonlinearity, URange};
use crate::problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Exact for the discrete problem.
    Computed,
    /// Maximum over finitely many samples; not a proof.
    Sampled,
    /// Supplied by the user as an analytic bound (checked against samples).
    Asserted,
}

impl Provenance {
    fn combine(self, other: Provenance) -> Provenance {
        use Provenance::*;
        match (self, other) {
            (Sampled, _) | (_, Sampled) => Sampled,
            (Asserted, _) | (_, Asserted) => Asserted,
            _ => Computed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "PASS-SAMPLED")]
    PassSampled,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self != Verdict::Fail
    }

    fn holds(condition: bool, provenance: Provenance) -> Verdict {
        match (condition, provenance) {
            (false, _) => Verdict::Fail,
            (true, Provenance::Sampled) => Verdict::PassSampled,
            (true, _) => Verdict::Pass,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::PassSampled => "PASS-SAMPLED",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub provenance: Provenance,
}

/// How to obtain the split `|f(x,u)| <= a₁(x) + b₁(x)|u|`.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum GrowthSpec {
    /// Exact split for `f` affine in `u`, sampled envelope otherwise.
    #[default]
    Auto,
    /// User-supplied `a₁(x)`, `b₁(x)`.
    Asserted { a1: Expr, b1: Expr },
    /// Affine envelope fitted to `max_x |f(x, u)|` over sampled `u`.
    Sampled,
}

/// Which estimate of `|N(u)|` against `|Au|` produced `β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthRoute {
    /// `β = c_m |b₁|_h`, through `|u|_∞ <= c_m |Au|_h`.
    Embedding,
    /// `β = sup b₁ / α`, through `|u|_h <= |Au|_h / α`.
    Poincare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthBound {
    pub beta: f64,
    pub delta: f64,
    pub provenance: Provenance,
    pub route: GrowthRoute,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_embedding: Option<f64>,
    pub beta_poincare: f64,
    /// `|b₁|_h`.
    pub b1_norm: f64,
    /// `max_i b₁(x_i)`.
    pub b1_sup: f64,
}

/// `γ` as the largest `f_u(x_i, u_j)` over nodes and `samples` equispaced
/// `u_j` in `range`, or the asserted `b₃`.
///
/// When `f_u` does not depend on `u` the node maximum is exact and the
/// provenance is `Computed`. An asserted `b₃` below the sampled maximum is
/// rejected.
pub fn estimate_gamma(nf: &Nonlinearity, range: URange, samples: usize, asserted_b3: Option<f64>) -> Result<Estimate> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two u samples".into()));
    }
    let us = if nf.is_affine() { vec![0.0] } else { range.samples(samples) };
    let mut max = f64::NEG_INFINITY;
    for node in 0..nf.domain().len() {
        for &u in &us {
            max = max.max(nf.eval_fu(node, u)?);
        }
    }
    match asserted_b3 {
        Some(b3) => {
            if !b3.is_finite() || b3 < max {
                return Err(Error::Growth(format!("asserted b3 = {b3} is below the sampled maximum of f_u ({max})")));
            }
            Ok(Estimate { value: b3, provenance: Provenance::Asserted })
        }
        None => Ok(Estimate {
            value: max,
            provenance: if nf.is_affine() { Provenance::Computed } else { Provenance::Sampled },
        }),
    }
}

/// Growth constants `β`, `δ` for `|N(u)|_h <= β |Au|_h + δ`.
///
/// `δ = |a₁|_h`. Both `c_m |b₁|_h` (when `c_m` is given) and `sup b₁ / α`
/// are valid bounds for `β`; the smaller one is used.
pub fn estimate_beta_delta(
    nf: &Nonlinearity,
    alpha: f64,
    c_m: Option<&EmbeddingConstant>,
    spec: &GrowthSpec,
    range: URange,
    samples: usize,
) -> Result<GrowthBound> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be positive")));
    }
    let domain = nf.domain().clone();
    let n = domain.len();
    let (a1, b1, split_provenance) = match spec {
        GrowthSpec::Asserted { a1, b1 } => {
            let a1 = weight_field(a1, nf, "a1")?;
            let b1 = weight_field(b1, nf, "b1")?;
            check_split(nf, &a1, &b1, range, samples)?;
            (a1, b1, Provenance::Asserted)
        }
        GrowthSpec::Auto if nf.is_affine() => {
            let mut a1 = Vec::with_capacity(n);
            let mut b1 = Vec::with_capacity(n);
            for node in 0..n {
                a1.push(nf.eval_f(node, 0.0)?.abs());
                b1.push(nf.eval_fu(node, 0.0)?.abs());
            }
            (GridField::new(domain.clone(), a1)?, GridField::new(domain.clone(), b1)?, Provenance::Computed)
        }
        GrowthSpec::Auto | GrowthSpec::Sampled => {
            let (a, b) = envelope_fit(nf, range, samples)?;
            (GridField::constant(domain.clone(), a), GridField::constant(domain.clone(), b), Provenance::Sampled)
        }
    };

    let delta = a1.norm();
    let b1_norm = b1.norm();
    let b1_sup = b1.norm_inf();
    let beta_poincare = b1_sup / alpha;
    let beta_embedding = c_m.map(|c| c.value * b1_norm);
    let (beta, route, route_provenance) = match (beta_embedding, c_m) {
        (Some(be), Some(c)) if be < beta_poincare => {
            (be, GrowthRoute::Embedding, if c.exact { Provenance::Computed } else { Provenance::Sampled })
        }
        _ => (beta_poincare, GrowthRoute::Poincare, Provenance::Computed),
    };
    Ok(GrowthBound {
        beta,
        delta,
        provenance: split_provenance.combine(route_provenance),
        route,
        beta_embedding,
        beta_poincare,
        b1_norm,
        b1_sup,
    })
}

fn weight_field(e: &Expr, nf: &Nonlinearity, name: &str) -> Result<GridField> {
    check_variables(e, nf.domain().dim(), false)?;
    let values = (0..nf.domain().len())
        .map(|node| {
            let coords = nf.coords(node);
            let v = e.evaluate(&Binding::at(coords, 0.0)).map_err(|source| Error::Domain {
                node,
                coords,
                u: 0.0,
                source,
            })?;
            if v < 0.0 {
                return Err(Error::Growth(format!("{name} is negative ({v}) at node {node}")));
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    GridField::new(nf.domain().clone(), values)
}

fn check_split(nf: &Nonlinearity, a1: &GridField, b1: &GridField, range: URange, samples: usize) -> Result<()> {
    for u in range.samples(samples) {
        for node in 0..nf.domain().len() {
            let lhs = nf.eval_f(node, u)?.abs();
            let rhs = a1.values()[node] + b1.values()[node] * u.abs();
            if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
                return Err(Error::Growth(format!(
                    "asserted split violated at node {node}, u = {u}: |f| = {lhs} > {rhs}"
                )));
            }
        }
    }
    Ok(())
}

/// Least-squares line through `(|u_j|, max_x |f(x, u_j)|)`, shifted up to
/// dominate every sample. Returns `(a, b)` with `a, b >= 0`.
fn envelope_fit(nf: &Nonlinearity, range: URange, samples: usize) -> Result<(f64, f64)> {
    let us = range.samples(samples);
    let mut pts = Vec::with_capacity(us.len());
    for &u in &us {
        let mut m: f64 = 0.0;
        for node in 0..nf.domain().len() {
            m = m.max(nf.eval_f(node, u)?.abs());
        }
        pts.push((u.abs(), m));
    }
    let k = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let var: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if !(var > 0.0) {
        return Err(Error::Growth("degenerate envelope fit: all sampled |u| coincide".into()));
    }
    let cov: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let b = (cov / var).max(0.0);
    let a = pts.iter().map(|p| p.1 - b * p.0).fold(0.0, f64::max);
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifySettings {
    pub u_range: URange,
    pub samples: usize,
    pub asserted_b3: Option<f64>,
    pub growth: GrowthSpec,
    /// Relative margin for the strict inequalities: `γ <= α(1 - margin)`,
    /// `β <= 1 - margin`.
    pub margin: f64,
    pub embedding: EmbeddingSample,
}

impl Default for CertifySettings {
    fn default() -> Self {
        CertifySettings {
            u_range: URange { min: -10.0, max: 10.0 },
            samples: 21,
            asserted_b3: None,
            growth: GrowthSpec::Auto,
            margin: 1e-9,
            embedding: EmbeddingSample::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionVerdicts {
    #[serde(rename = "A1")]
    pub a1: Verdict,
    #[serde(rename = "A2")]
    pub a2: Verdict,
    #[serde(rename = "N1")]
    pub n1: Verdict,
    #[serde(rename = "N2i")]
    pub n2i: Verdict,
    #[serde(rename = "N2ii")]
    pub n2ii: Verdict,
    #[serde(rename = "P3")]
    pub p3: Verdict,
}

impl ConditionVerdicts {
    pub fn worst(&self) -> Verdict {
        [self.a1, self.a2, self.n1, self.n2i, self.n2ii, self.p3].into_iter().max().unwrap_or(Verdict::Pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub alpha_minus_gamma: f64,
    pub one_minus_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCertificate {
    pub alpha: Estimate,
    pub gamma: Estimate,
    pub beta: Estimate,
    pub delta: Estimate,
    pub growth: GrowthBound,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_m: Option<EmbeddingConstant>,
    pub verdicts: ConditionVerdicts,
    pub margins: Margins,
    pub overall: Verdict,
    pub notes: BTreeMap<String, String>,
}

impl HypothesisCertificate {
    /// `α - γ`, the lower bound on the spectrum of `F'(u)` when passed.
    pub fn coercivity_floor(&self) -> f64 {
        self.alpha.value - self.gamma.value
    }
}

/// Assembles every constant for `problem` and fills in the verdicts.
pub fn certify(problem: &Problem, settings: &CertifySettings) -> Result<HypothesisCertificate> {
    let a = &problem.operator;
    let nf = &problem.nonlinearity;
    let alpha = poincare_constant(a)?;
    let c_m = if a.domain().dim() <= 3 { Some(embedding_constant(a, &settings.embedding)?) } else { None };
    let gamma = estimate_gamma(nf, settings.u_range, settings.samples, settings.asserted_b3)?;
    let growth = estimate_beta_delta(nf, alpha, c_m.as_ref(), &settings.growth, settings.u_range, settings.samples)?;

    let margin = settings.margin;
    let alpha = Estimate { value: alpha, provenance: Provenance::Computed };
    let beta = Estimate { value: growth.beta, provenance: growth.provenance };
    let delta = Estimate { value: growth.delta, provenance: growth.provenance };
    let gamma_ok = gamma.value <= alpha.value * (1.0 - margin);
    let verdicts = ConditionVerdicts {
        a1: Verdict::Pass,
        a2: Verdict::holds(alpha.value > 0.0, alpha.provenance),
        n1: Verdict::Pass,
        n2i: Verdict::holds(beta.value <= 1.0 - margin && delta.value >= 0.0, beta.provenance),
        n2ii: Verdict::holds(gamma_ok, gamma.provenance),
        p3: Verdict::holds(gamma_ok, gamma.provenance),
    };
    let mut notes = BTreeMap::new();
    notes.insert("A1".to_string(), "satisfied trivially at the discrete level (finite-dimensional spaces)".to_string());
    notes.insert("N1".to_string(), "symbolic derivative exists; N'(u) is diagonal, hence symmetric".to_string());
    notes.insert(
        "P2m".to_string(),
        format!(
            "sampled: f_u finite at every node for {} u-samples in [{}, {}]",
            settings.samples, settings.u_range.min, settings.u_range.max
        ),
    );
    Ok(HypothesisCertificate {
        margins: Margins { alpha_minus_gamma: alpha.value - gamma.value, one_minus_beta: 1.0 - beta.value },
        overall: verdicts.worst(),
        alpha,
        gamma,
        beta,
        delta,
        growth,
        c_m,
        verdicts,
        notes,
    })
}
