//! Damped Gauss-Newton minimization of `φ_y(u) = ½|F(u) - y|_h²` with
//! `F(u) = Au - N(u)`.
//!
//! Because `F'(u) = A - N'(u)` is symmetric, the Gauss-Newton step
//! `F'(u)ᵀF'(u) s = -F'(u)ᵀ(F(u) - y)` reduces to the Newton step
//! `F'(u) s = -(F(u) - y)`, which is solved matrix-free by conjugate
//! gradients. Steps are damped by Armijo backtracking on `φ_y`.

use serde::{Deserialize, Serialize};

use crate::certify::{HypothesisCertificate, Verdict};
use crate::error::{Error, Result};
use crate::grid::{dot, GridField};
use crate::nemytskii::Nonlinearity;
use crate::operators::{CgWorkspace, DiscreteOperator, LinearOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Stop once `|F(u) - y|_h / (1 + |y|_h) <= tolerance`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relative residual for the inner conjugate-gradient solves.
    pub cg_tolerance: f64,
    /// Sufficient-decrease coefficient of the Armijo test.
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub min_step: f64,
    /// Record `<F'(u)s, s>_h / |s|_h²` along every step direction.
    pub monitor: bool,
    /// Report a monitor violation when the recorded quotient drops below
    /// this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rayleigh_floor: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: 1e-10,
            max_iterations: 50,
            cg_tolerance: 1e-12,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            min_step: 1e-10,
            monitor: true,
            rayleigh_floor: None,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            problems.push(format!("tolerance {} outside (0, 1)", self.tolerance));
        }
        if !(self.cg_tolerance > 0.0 && self.cg_tolerance < 1.0) {
            problems.push(format!("cg_tolerance {} outside (0, 1)", self.cg_tolerance));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            problems.push(format!("backtrack {} outside (0, 1)", self.backtrack));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            problems.push(format!("armijo_c1 {} outside (0, 1)", self.armijo_c1));
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            problems.push(format!("min_step {} outside (0, 1]", self.min_step));
        }
        if self.max_iterations < 1 {
            problems.push("max_iterations must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Permission to run the solver.
#[derive(Debug, Clone, Copy)]
pub enum SolveGuard<'a> {
    /// A passing certificate: every linear solve is positive definite, so a
    /// conjugate-gradient failure is a contradiction and stops the run.
    Certified(&'a HypothesisCertificate),
    /// No guarantee. Conjugate-gradient failures fall back to a steepest
    /// descent step on `φ_y`.
    Unsafe,
}

impl SolveGuard<'_> {
    fn check(&self) -> Result<()> {
        match self {
            SolveGuard::Certified(c) if c.overall == Verdict::Fail => Err(Error::Uncertified(c.overall)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveVerdict {
    Converged,
    Stalled,
    Diverged,
    MonitorViolation,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: GridField,
    pub iterations: usize,
    /// `|F(u_k) - y|_h` for k = 0..=iterations.
    pub residual_norms: Vec<f64>,
    pub phi: Vec<f64>,
    pub step_lengths: Vec<f64>,
    pub cg_iterations: Vec<usize>,
    /// Rayleigh quotient of `F'(u_k)` along each step direction.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rayleigh: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rayleigh_min: Option<f64>,
    pub gradient_steps: usize,
    pub final_relative_residual: f64,
    pub solution_norm: f64,
    pub verdict: SolveVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// `Au - N(u) - y`.
pub fn residual(a: &DiscreteOperator, nf: &Nonlinearity, u: &GridField, y: &GridField) -> Result<GridField> {
    a.apply(u)?.sub(&nf.apply(u)?)?.sub(y)
}

/// `½ |Au - N(u) - y|_h²`.
pub fn phi(a: &DiscreteOperator, nf: &Nonlinearity, u: &GridField, y: &GridField) -> Result<f64> {
    Ok(0.5 * residual(a, nf, u, y)?.norm().powi(2))
}

/// The `L²_h` gradient of `φ_y`: `F'(u)(F(u) - y)`.
pub fn grad_phi(a: &DiscreteOperator, nf: &Nonlinearity, u: &GridField, y: &GridField) -> Result<GridField> {
    let r = residual(a, nf, u, y)?;
    let diag = nf.derivative_diagonal(u)?;
    let jac = Jacobian { a, diag: diag.values() };
    let mut out = vec![0.0; r.len()];
    jac.apply_into(r.values(), &mut out);
    Ok(GridField::from_raw(r.domain().clone(), out))
}

/// `F'(u) = A - diag(f_u(x_i, u_i))`.
struct Jacobian<'a> {
    a: &'a DiscreteOperator,
    diag: &'a [f64],
}

impl LinearOperator for Jacobian<'_> {
    fn len(&self) -> usize {
        self.diag.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.a.apply_into(x, y);
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(self.diag) {
            *yi -= d * xi;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.a.diagonal().into_iter().zip(self.diag).map(|(a, d)| a - d).collect()
    }
}

/// Solves `F(u) = y` from `u0`. See the module docs for the iteration.
pub fn gauss_newton_solve(
    a: &DiscreteOperator,
    nf: &Nonlinearity,
    y: &GridField,
    u0: &GridField,
    opts: &SolveOptions,
    guard: SolveGuard<'_>,
) -> Result<SolveReport> {
    opts.validate()?;
    guard.check()?;
    y.check_grid(a.domain())?;
    u0.check_grid(a.domain())?;

    let n = a.domain().len();
    let scale = 1.0 + y.norm();
    let mut u = u0.clone();
    let mut r = residual(a, nf, &u, y)?;
    let mut r_norm = r.norm();
    let mut phi_u = 0.5 * r_norm * r_norm;

    let mut report = SolveReport {
        solution: u.clone(),
        iterations: 0,
        residual_norms: vec![r_norm],
        phi: vec![phi_u],
        step_lengths: Vec::new(),
        cg_iterations: Vec::new(),
        rayleigh: Vec::new(),
        rayleigh_min: None,
        gradient_steps: 0,
        final_relative_residual: r_norm / scale,
        solution_norm: u.norm(),
        verdict: SolveVerdict::Stalled,
        message: None,
    };
    if !phi_u.is_finite() {
        report.verdict = SolveVerdict::Diverged;
        return Ok(report);
    }

    let mut ws = CgWorkspace::new();
    let mut step = vec![0.0; n];
    let mut j_step = vec![0.0; n];
    let mut j_res = vec![0.0; n];
    let neg_r: &mut Vec<f64> = &mut vec![0.0; n];
    let mut stop: Option<(SolveVerdict, Option<String>)> = None;

    for _ in 0..opts.max_iterations {
        if r_norm / scale <= opts.tolerance {
            break;
        }
        let diag = nf.derivative_diagonal(&u)?;
        let jac = Jacobian { a, diag: diag.values() };
        for (ni, ri) in neg_r.iter_mut().zip(r.values()) {
            *ni = -ri;
        }
        jac.apply_into(r.values(), &mut j_res);
        match ws.solve(&jac, neg_r, &mut step, opts.cg_tolerance) {
            Ok(outcome) => report.cg_iterations.push(outcome.iterations),
            Err(err @ Error::CgNotConverged { .. }) => match guard {
                SolveGuard::Certified(_) => {
                    stop = Some((
                        SolveVerdict::MonitorViolation,
                        Some(format!("positive definiteness of F'(u) lost: {err}")),
                    ));
                    break;
                }
                SolveGuard::Unsafe => {
                    for (s, g) in step.iter_mut().zip(&j_res) {
                        *s = -g;
                    }
                    report.cg_iterations.push(0);
                    report.gradient_steps += 1;
                }
            },
            Err(other) => return Err(other),
        }

        jac.apply_into(&step, &mut j_step);
        let s_norm2 = dot(&step, &step);
        if opts.monitor && s_norm2 > 0.0 {
            let q = dot(&j_step, &step) / s_norm2;
            report.rayleigh.push(q);
            report.rayleigh_min = Some(report.rayleigh_min.map_or(q, |m: f64| m.min(q)));
            if let Some(floor) = opts.rayleigh_floor {
                if q < floor {
                    stop = Some((
                        SolveVerdict::MonitorViolation,
                        Some(format!("Rayleigh quotient {q} below floor {floor}")),
                    ));
                    break;
                }
            }
        }

        // Directional derivative of φ_y along the step, <F'(u)r, s>_h.
        let slope = a.domain().cell_volume() * dot(&j_res, &step);
        if !(slope < 0.0) {
            stop = Some((SolveVerdict::Stalled, Some(format!("step is not a descent direction (slope {slope})"))));
            break;
        }

        let mut t = 1.0;
        let accepted = loop {
            let trial_values: Vec<f64> = u.values().iter().zip(&step).map(|(ui, si)| ui + t * si).collect();
            let trial = GridField::from_raw(u.domain().clone(), trial_values);
            if let Ok(tr) = residual(a, nf, &trial, y) {
                let tr_norm = tr.norm();
                let phi_t = 0.5 * tr_norm * tr_norm;
                if phi_t.is_finite() && phi_t < phi_u && phi_t <= phi_u + opts.armijo_c1 * t * slope {
                    break Some((trial, tr, tr_norm, phi_t));
                }
            }
            t *= opts.backtrack;
            if t < opts.min_step {
                break None;
            }
        };
        let Some((trial, tr, tr_norm, phi_t)) = accepted else {
            stop = Some((SolveVerdict::Stalled, Some("line search fell below the minimum step".into())));
            break;
        };
        u = trial;
        r = tr;
        r_norm = tr_norm;
        phi_u = phi_t;
        report.iterations += 1;
        report.step_lengths.push(t);
        report.residual_norms.push(r_norm);
        report.phi.push(phi_u);
    }

    report.final_relative_residual = r_norm / scale;
    report.solution_norm = u.norm();
    report.solution = u;
    match stop {
        Some((verdict, message)) => {
            report.verdict = verdict;
            report.message = message;
        }
        None if report.final_relative_residual <= opts.tolerance => report.verdict = SolveVerdict::Converged,
        None => {
            report.verdict = SolveVerdict::Stalled;
            report.message = Some(format!("iteration cap {} reached", opts.max_iterations));
        }
    }
    Ok(report)
}
