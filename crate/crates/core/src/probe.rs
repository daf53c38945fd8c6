//! Multistart probing of uniqueness: solve from several initial fields and
//! compare the limits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{HypothesisCertificate, Verdict};
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::nemytskii::Nonlinearity;
use crate::operators::DiscreteOperator;
use crate::solve::{gauss_newton_solve, SolveGuard, SolveOptions, SolveReport, SolveVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeOptions {
    pub starts: usize,
    pub seed: u64,
    pub amplitude: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { starts: 10, seed: 42, amplitude: 50.0 }
    }
}

impl ProbeOptions {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.starts < 2 {
            problems.push(format!("probe needs at least 2 starts, got {}", self.starts));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            problems.push(format!("probe amplitude {} must be finite and non-negative", self.amplitude));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UniquenessVerdict {
    UniqueWithinTol,
    DistinctSolutionsFound,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartSummary {
    pub start: usize,
    pub initial_norm: f64,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_relative_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rayleigh_min: Option<f64>,
    pub gradient_steps: usize,
    pub verdict: SolveVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub starts: usize,
    pub seed: u64,
    pub amplitude: f64,
    /// Verdict of the certificate the probe ran under, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_verdict: Option<Verdict>,
    pub runs: Vec<StartSummary>,
    /// `max_{i,j} |u_i - u_j|_h / (1 + max_k |u_k|_h)` over converged runs.
    pub max_discrepancy: f64,
    /// Smallest Rayleigh quotient seen over all runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rayleigh_min: Option<f64>,
    pub verdict: UniquenessVerdict,
    /// Limit of the first converged run.
    #[serde(skip)]
    pub solution: Option<GridField>,
    #[serde(skip)]
    pub solves: Vec<SolveReport>,
}

/// Initial field for start `index`: zero for the first, uniform entries in
/// `[-amplitude, amplitude]` otherwise. Every start draws from its own
/// stream of a seeded ChaCha generator, so fields do not depend on the
/// order in which starts are run.
pub fn initial_field(template: &GridField, seed: u64, index: usize, amplitude: f64) -> GridField {
    if index == 0 || amplitude == 0.0 {
        return GridField::zeros(template.domain().clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let values = (0..template.len()).map(|_| rng.gen_range(-amplitude..=amplitude)).collect();
    GridField::from_raw(template.domain().clone(), values)
}

/// Runs `opts.starts` independent solves and classifies the result.
pub fn multistart(
    a: &DiscreteOperator,
    nf: &Nonlinearity,
    y: &GridField,
    probe: &ProbeOptions,
    solve: &SolveOptions,
    guard: SolveGuard<'_>,
) -> Result<UniquenessReport> {
    probe.validate()?;
    solve.validate()?;
    y.check_grid(a.domain())?;

    let outcomes: Vec<(f64, Result<SolveReport>)> = (0..probe.starts)
        .into_par_iter()
        .map(|j| {
            let u0 = initial_field(y, probe.seed, j, probe.amplitude);
            (u0.norm(), gauss_newton_solve(a, nf, y, &u0, solve, guard))
        })
        .collect();

    let mut runs = Vec::with_capacity(outcomes.len());
    let mut solves = Vec::new();
    let mut all_converged = true;
    for (start, (initial_norm, outcome)) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rep) => {
                all_converged &= rep.verdict == SolveVerdict::Converged;
                runs.push(StartSummary {
                    start,
                    initial_norm,
                    iterations: rep.iterations,
                    final_relative_residual: Some(rep.final_relative_residual),
                    solution_norm: Some(rep.solution_norm),
                    rayleigh_min: rep.rayleigh_min,
                    gradient_steps: rep.gradient_steps,
                    verdict: rep.verdict,
                    message: rep.message.clone(),
                });
                solves.push(rep);
            }
            // Domain errors and the like are recorded against the start.
            Err(err @ (Error::Domain { .. } | Error::CgNotConverged { .. } | Error::NonFiniteField { .. })) => {
                all_converged = false;
                runs.push(StartSummary {
                    start,
                    initial_norm,
                    iterations: 0,
                    final_relative_residual: None,
                    solution_norm: None,
                    rayleigh_min: None,
                    gradient_steps: 0,
                    verdict: SolveVerdict::Diverged,
                    message: Some(err.to_string()),
                });
            }
            Err(other) => return Err(other),
        }
    }

    let converged: Vec<&SolveReport> = solves.iter().filter(|r| r.verdict == SolveVerdict::Converged).collect();
    let max_discrepancy = max_discrepancy(converged.iter().map(|r| &r.solution));
    let rayleigh_min = solves.iter().filter_map(|r| r.rayleigh_min).reduce(f64::min);
    let verdict = if !all_converged {
        UniquenessVerdict::Inconclusive
    } else if max_discrepancy > 10.0 * solve.tolerance {
        UniquenessVerdict::DistinctSolutionsFound
    } else {
        UniquenessVerdict::UniqueWithinTol
    };
    let certificate_verdict = match guard {
        SolveGuard::Certified(c) => Some(c.overall),
        SolveGuard::Unsafe => None,
    };
    Ok(UniquenessReport {
        starts: probe.starts,
        seed: probe.seed,
        amplitude: probe.amplitude,
        certificate_verdict,
        runs,
        max_discrepancy,
        rayleigh_min,
        verdict,
        solution: converged.first().map(|r| r.solution.clone()),
        solves,
    })
}

/// Attaches the certificate verdict to a report produced under an unsafe
/// guard.
pub fn with_certificate(mut report: UniquenessReport, cert: &HypothesisCertificate) -> UniquenessReport {
    report.certificate_verdict = Some(cert.overall);
    report
}

fn max_discrepancy<'a>(fields: impl Iterator<Item = &'a GridField> + Clone) -> f64 {
    let list: Vec<&GridField> = fields.collect();
    let scale = 1.0 + list.iter().map(|f| f.norm()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for i in 0..list.len() {
        for j in i + 1..list.len() {
            let d = list[i].sub(list[j]).expect("runs share one grid").norm();
            worst = worst.max(d);
        }
    }
    worst / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;
    use crate::laplacian::build_laplacian;
    use crate::nemytskii::URange;
    use std::sync::Arc;

    fn setup(f: &str, n: usize) -> (DiscreteOperator, Nonlinearity, GridField) {
        let d = Arc::new(GridDomain::unit_interval(n).unwrap());
        let a = build_laplacian(d.clone());
        let nf = Nonlinearity::parse(f, d.clone(), URange::new(-5.0, 5.0).unwrap(), 5).unwrap();
        let y = GridField::from_fn(d, |c| 1.0 + c[0]);
        (a, nf, y)
    }

    #[test]
    fn starts_are_reproducible_and_independent() {
        let (_, _, y) = setup("0", 9);
        let a = initial_field(&y, 7, 3, 2.0);
        let b = initial_field(&y, 7, 3, 2.0);
        assert_eq!(a, b);
        assert_ne!(a, initial_field(&y, 7, 4, 2.0));
        assert_ne!(a, initial_field(&y, 8, 3, 2.0));
        assert!(a.values().iter().all(|v| v.abs() <= 2.0));
        assert_eq!(initial_field(&y, 7, 0, 2.0).norm(), 0.0);
    }

    #[test]
    fn linear_problem_is_unique() {
        let (a, nf, y) = setup("5*u + x", 31);
        let probe = ProbeOptions { starts: 5, seed: 1, amplitude: 10.0 };
        let rep = multistart(&a, &nf, &y, &probe, &SolveOptions::default(), SolveGuard::Unsafe).unwrap();
        assert_eq!(rep.verdict, UniquenessVerdict::UniqueWithinTol);
        assert!(rep.max_discrepancy <= 1e-12);
        assert_eq!(rep.runs.len(), 5);
        assert!(rep.runs.iter().all(|r| r.iterations == 1));
    }

    #[test]
    fn needs_two_starts() {
        let (a, nf, y) = setup("0", 3);
        let probe = ProbeOptions { starts: 1, ..ProbeOptions::default() };
        assert!(matches!(
            multistart(&a, &nf, &y, &probe, &SolveOptions::default(), SolveGuard::Unsafe),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn discrepancy_scale() {
        let d = Arc::new(GridDomain::unit_interval(3).unwrap());
        let one = GridField::constant(d.clone(), 1.0);
        let zero = GridField::zeros(d);
        let fields = [one.clone(), zero];
        let got = max_discrepancy(fields.iter());
        assert!((got - one.norm() / (1.0 + one.norm())).abs() < 1e-15);
    }
}
