//! Command-line front-end for `uniqcert`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use uniqcert_core::certify::Provenance;
use uniqcert_core::config::FieldKind;
use uniqcert_core::report::{Command, Report};
use uniqcert_core::{
    certify, multistart, refinement_study, residual, GridField, ProblemConfig, SolveGuard, SolveVerdict,
    UniquenessVerdict, Verdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CommandArg {
    Certify,
    Solve,
    Probe,
    Study,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Command {
        match c {
            CommandArg::Certify => Command::Certify,
            CommandArg::Solve => Command::Solve,
            CommandArg::Probe => Command::Probe,
            CommandArg::Study => Command::Study,
        }
    }
}

/// Certify, solve and probe discretized semilinear problems.
#[derive(Debug, Parser)]
#[command(name = "uniqcert", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: CommandArg,
    /// Problem configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Report path; field dumps are written next to it. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the probe seed from the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Solve even when the certificate fails.
    #[arg(long = "unsafe")]
    pub allow_unsafe: bool,
    /// Include wall-clock timings in the report (makes it non-reproducible).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub allow_unsafe: bool,
    pub timings: bool,
}

/// A finished command: the report plus the fields requested for dumping.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub fields: Vec<(FieldKind, GridField)>,
}

/// Runs one command on a validated configuration.
pub fn execute(command: Command, config: &ProblemConfig, opts: RunOptions) -> uniqcert_core::Result<Outcome> {
    let start = Instant::now();
    let mut timings = BTreeMap::new();
    let mut report = Report::new(command, config)?;
    let problem = config.problem()?;
    let cert = certify(&problem, &config.certify_settings()?)?;
    timings.insert("certify".to_string(), start.elapsed().as_millis() as u64);

    let mut fields = Vec::new();
    let gated = command != Command::Certify && cert.overall == Verdict::Fail && !opts.allow_unsafe;
    if gated {
        eprintln!("certificate verdict is FAIL; pass --unsafe to run `{command:?}` anyway");
    }
    if command != Command::Certify && !gated {
        let guard = if cert.overall == Verdict::Fail { SolveGuard::Unsafe } else { SolveGuard::Certified(&cert) };
        let mut solver = config.solver;
        // The spectrum of F'(u) is bounded below by α - γ only when γ is a
        // genuine bound on f_u.
        if solver.rayleigh_floor.is_none()
            && cert.overall != Verdict::Fail
            && cert.gamma.provenance != Provenance::Sampled
        {
            solver.rayleigh_floor = Some(cert.coercivity_floor() - 1e-8 * cert.alpha.value);
        }
        let t = Instant::now();
        let solution = match command {
            Command::Solve => {
                let u0 = GridField::zeros(problem.domain().clone());
                let rep = uniqcert_core::gauss_newton_solve(
                    &problem.operator,
                    &problem.nonlinearity,
                    &problem.rhs,
                    &u0,
                    &solver,
                    guard,
                )?;
                let u = rep.solution.clone();
                report.solve = Some(rep);
                Some(u)
            }
            Command::Probe => {
                let mut rep =
                    multistart(&problem.operator, &problem.nonlinearity, &problem.rhs, &config.probe, &solver, guard)?;
                rep.certificate_verdict = Some(cert.overall);
                let u = rep.solution.clone();
                report.probe = Some(rep);
                u
            }
            Command::Study => {
                let mut study_config = config.clone();
                study_config.solver = solver;
                report.study = Some(refinement_study(&study_config, guard)?);
                None
            }
            Command::Certify => unreachable!(),
        };
        timings.insert(format!("{command:?}").to_lowercase(), t.elapsed().as_millis() as u64);

        if let Some(u) = solution {
            for &kind in &config.output.fields {
                let field = match kind {
                    FieldKind::Solution => u.clone(),
                    FieldKind::Rhs => problem.rhs.clone(),
                    FieldKind::Residual => residual(&problem.operator, &problem.nonlinearity, &u, &problem.rhs)?,
                };
                fields.push((kind, field));
            }
        }
    }
    report.certificate = Some(cert);
    timings.insert("total".to_string(), start.elapsed().as_millis() as u64);
    if opts.timings {
        report.timings_ms = Some(timings);
    }
    Ok(Outcome { report, fields })
}

/// Exit status for a report: 2 for a failed certificate, distinct
/// solutions or a monitor violation; 1 for runs that did not converge; 0
/// otherwise.
pub fn exit_status(report: &Report) -> i32 {
    let mut codes = Vec::new();
    if let Some(c) = &report.certificate {
        codes.push(if c.overall == Verdict::Fail { 2 } else { 0 });
    }
    let solve_code = |v: SolveVerdict| match v {
        SolveVerdict::Converged => 0,
        SolveVerdict::MonitorViolation => 2,
        SolveVerdict::Stalled | SolveVerdict::Diverged => 1,
    };
    if let Some(s) = &report.solve {
        codes.push(solve_code(s.verdict));
    }
    if let Some(p) = &report.probe {
        codes.push(match p.verdict {
            UniquenessVerdict::UniqueWithinTol => 0,
            UniquenessVerdict::DistinctSolutionsFound => 2,
            UniquenessVerdict::Inconclusive => 1,
        });
        codes.extend(p.runs.iter().map(|r| solve_code(r.verdict)));
    }
    if let Some(s) = &report.study {
        codes.extend(s.levels.iter().map(|l| solve_code(l.verdict)));
    }
    if codes.contains(&2) {
        2
    } else {
        codes.into_iter().max().unwrap_or(0)
    }
}

/// Writes `field` as CSV: index columns, coordinate columns, value; rows in
/// flat (row-major) order.
pub fn write_field_csv(path: &Path, field: &GridField) -> anyhow::Result<()> {
    let domain = field.domain();
    let dim = domain.dim();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header: Vec<&str> = ["i", "j", "k"][..dim].to_vec();
    header.extend(&["x", "y", "z"][..dim]);
    header.push("value");
    w.write_record(&header)?;
    for (flat, value) in field.values().iter().enumerate() {
        let mut row: Vec<String> = domain.multi_index(flat).iter().map(|i| i.to_string()).collect();
        row.extend(domain.coords(flat)[..dim].iter().map(|c| c.to_string()));
        row.push(value.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `report.json` + `solution` -> `report.solution.csv`.
pub fn field_path(out: &Path, kind: FieldKind) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.{}.csv", kind.name()))
}

/// Worker threads from `UNIQCERT_THREADS` (`0` or unset: automatic).
pub fn thread_count() -> anyhow::Result<usize> {
    match std::env::var("UNIQCERT_THREADS") {
        Ok(v) => v.trim().parse().with_context(|| format!("UNIQCERT_THREADS={v:?} is not a thread count")),
        Err(_) => Ok(0),
    }
}

/// Full CLI run; returns the process exit status.
pub fn run(cli: &Cli) -> anyhow::Result<i32> {
    let mut config =
        uniqcert_core::load_config(&cli.config).with_context(|| format!("loading {}", cli.config.display()))?;
    if let Some(seed) = cli.seed {
        config.probe.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(thread_count()?).build()?;
    let opts = RunOptions { allow_unsafe: cli.allow_unsafe, timings: cli.timings };
    let outcome = pool.install(|| execute(cli.command.into(), &config, opts))?;
    let text = outcome.report.to_json()?;
    match &cli.out {
        Some(out) => {
            std::fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
            for (kind, field) in &outcome.fields {
                write_field_csv(&field_path(out, *kind), field)?;
            }
        }
        None => print!("{text}"),
    }
    Ok(exit_status(&outcome.report))
}
