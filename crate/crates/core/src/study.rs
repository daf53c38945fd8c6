//! Grid refinement studies: the smallest eigenvalue and, when an exact
//! solution is known, discretization errors and observed orders.

use serde::Serialize;

use crate::config::ProblemConfig;
use crate::error::Result;
use crate::grid::{GridDomain, GridField};
use crate::laplacian::poincare_constant;
use crate::solve::{gauss_newton_solve, SolveGuard, SolveVerdict};

#[derive(Debug, Clone, Serialize)]
pub struct StudyLevel {
    pub nodes: Vec<usize>,
    pub spacing: Vec<f64>,
    pub alpha: f64,
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub verdict: SolveVerdict,
    /// `|u_h - u|_h` against the exact solution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyReport {
    pub levels: Vec<StudyLevel>,
    /// `log2(e_{k-1} / e_k)` between consecutive levels.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub orders_l2: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub orders_max: Vec<f64>,
}

/// Grid of refinement level `k`: `(n + 1) 2^k - 1` interior nodes per axis,
/// so the spacing halves with every level.
pub fn refined_grid(base: &GridDomain, level: usize) -> Result<GridDomain> {
    let counts = base.counts().iter().map(|n| (n + 1) * (1 << level) - 1).collect();
    GridDomain::new(base.lower().to_vec(), base.upper().to_vec(), counts)
}

/// Runs `config.study.levels` refinements of the configured problem.
pub fn refinement_study(config: &ProblemConfig, guard: SolveGuard<'_>) -> Result<StudyReport> {
    let base = config.grid()?;
    let mut levels = Vec::with_capacity(config.study.levels);
    for k in 0..config.study.levels {
        let grid = refined_grid(&base, k)?;
        let problem = config.problem_on(grid)?;
        let domain = problem.domain().clone();
        let alpha = poincare_constant(&problem.operator)?;
        let report = gauss_newton_solve(
            &problem.operator,
            &problem.nonlinearity,
            &problem.rhs,
            &GridField::zeros(domain.clone()),
            &config.solver,
            guard,
        )?;
        let (error_l2, error_max) = match config.exact_field(domain.clone())? {
            Some(exact) => {
                let e = report.solution.sub(&exact)?;
                (Some(e.norm()), Some(e.norm_inf()))
            }
            None => (None, None),
        };
        levels.push(StudyLevel {
            nodes: domain.counts().to_vec(),
            spacing: domain.spacing().to_vec(),
            alpha,
            iterations: report.iterations,
            final_relative_residual: report.final_relative_residual,
            verdict: report.verdict,
            error_l2,
            error_max,
        });
    }
    let orders = |pick: fn(&StudyLevel) -> Option<f64>| -> Vec<f64> {
        levels.windows(2).filter_map(|w| Some((pick(&w[0])? / pick(&w[1])?).log2())).collect()
    };
    let orders_l2 = orders(|l| l.error_l2);
    let orders_max = orders(|l| l.error_max);
    Ok(StudyReport { levels, orders_l2, orders_max })
}
