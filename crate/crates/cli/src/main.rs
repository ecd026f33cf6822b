//! `choquard`: run solves, sweeps, verification and the radial oracle from a
//! JSON configuration, writing results and a manifest to an output directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use log::{error, info, warn};
use serde_json::json;

use choquard_core::catalog::{
    check_assumptions, diagnostic_constants, NonlinVariant, PotentialVariant,
};
use choquard_core::experiments::{
    concentration_metrics, radial_oracle_pekar, sweep_epsilon, sweep_lambda, verify_battery,
    LoadedSolution, SweepResult,
};
use choquard_core::fibering::{solve_autonomous, solve_ground_state, SolveResult, TraceRow};
use choquard_core::grid;
use choquard_core::output::RunDir;
use choquard_core::{Config, Error};

const TOOL: &str = "choquard";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Verb {
    /// Ground state of the configured problem.
    Solve,
    /// Ground state with the potential replaced by its limit at infinity.
    SolveAutonomous,
    /// Verification battery and sampled assumption checks.
    Verify,
    /// Semiclassical sweep over `sweep.eps`.
    SweepEps,
    /// Autonomous levels over `sweep.lambda`, with path bounds.
    SweepLambda,
    /// Radial Choquard–Pekar reference level.
    Oracle,
    /// Resolved configuration, assumption checks and coercivity diagnostics.
    Report,
}

impl Verb {
    fn name(self) -> &'static str {
        match self {
            Verb::Solve => "solve",
            Verb::SolveAutonomous => "solve-autonomous",
            Verb::Verify => "verify",
            Verb::SweepEps => "sweep-eps",
            Verb::SweepLambda => "sweep-lambda",
            Verb::Oracle => "oracle",
            Verb::Report => "report",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = TOOL, version, about = "Ground states of nonlinear Choquard equations")]
struct Cli {
    #[arg(value_enum)]
    verb: Verb,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the solver, battery and sampling seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "THREADS")]
    threads: Option<usize>,
}

/// Exit statuses.
mod exit {
    pub const CONFIG: u8 = 2;
    pub const NOT_CONVERGED: u8 = 3;
    pub const VERIFICATION: u8 = 4;
    pub const IO: u8 = 5;
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidGrid(_)
        | Error::InvalidParameter(_)
        | Error::GridMismatch { .. }
        | Error::TooLarge(_) => exit::CONFIG,
        Error::Io { .. } => exit::IO,
        Error::Verification(_) => exit::VERIFICATION,
        Error::NotInLambda { .. }
        | Error::NoBracket { .. }
        | Error::NonFinite(_)
        | Error::Failed(_) => exit::NOT_CONVERGED,
    }
}

/// Outcome of a verb that ran to completion.
enum Outcome {
    Ok,
    NotConverged,
    VerificationFailed,
}

impl Outcome {
    fn status(&self) -> &'static str {
        match self {
            Outcome::Ok => "ok",
            Outcome::NotConverged => "not-converged",
            Outcome::VerificationFailed => "verification-failed",
        }
    }

    fn code(&self) -> u8 {
        match self {
            Outcome::Ok => 0,
            Outcome::NotConverged => exit::NOT_CONVERGED,
            Outcome::VerificationFailed => exit::VERIFICATION,
        }
    }
}

struct Run {
    config: Config,
    out: RunDir,
    fingerprint: Option<String>,
}

fn write_solve(run: &mut Run, result: &SolveResult) -> Result<Outcome, Error> {
    run.out.write_field("solution.field", &result.field)?;
    let concentration = concentration_metrics(&result.field)?;
    let summary = json!({
        "solve": result.summary(),
        "concentration": concentration,
        "grid": run.config.grid_spec()?.to_string(),
    });
    run.out.write_json("summary.json", &summary)?;
    run.out.write_csv(
        "trace.csv",
        TraceRow::CSV_HEADER,
        result.trace.iter().map(TraceRow::csv_row),
    )?;
    println!(
        "m = {:.12e}  converged = {}  iterations = {}  P residual = {:.2e}  gradient residual = {:.2e}",
        result.m, result.converged, result.iterations, result.pohozaev_residual, result.gradient_residual
    );
    Ok(if result.converged {
        Outcome::Ok
    } else {
        Outcome::NotConverged
    })
}

fn write_sweep(
    run: &mut Run,
    name: &str,
    result: &SweepResult,
    reference: &[f64],
) -> Result<Outcome, Error> {
    run.out.write_csv(
        &format!("{name}.csv"),
        SweepResult::CSV_HEADER,
        result.csv_rows(reference),
    )?;
    run.out.write_json(&format!("{name}.json"), result)?;
    for (k, u) in result.fields.iter().enumerate() {
        run.out.write_field(&format!("{name}_{k}.field"), u)?;
    }
    for v in &result.verdicts {
        let tag = if v.pass { "pass" } else { "FAIL" };
        let kind = if v.hard { "hard" } else { "soft" };
        println!("{tag} ({kind}) {}: {}", v.name, v.detail);
    }
    for p in &result.points {
        println!(
            "{:>10} m = {:.12e} converged = {}",
            p.parameter, p.solve.m, p.solve.converged
        );
    }
    Ok(if result.verdicts.iter().any(|v| v.hard && !v.pass) {
        Outcome::VerificationFailed
    } else if !result.all_converged() {
        Outcome::NotConverged
    } else {
        Outcome::Ok
    })
}

fn require_pekar(config: &Config) -> Result<(), Error> {
    let pekar_nonlin = match config.nonlinearity {
        NonlinVariant::Pekar => true,
        NonlinVariant::Power { p } => p == 2.0,
        _ => false,
    };
    if config.grid.dim != 3 || config.alpha != 2.0 || !pekar_nonlin {
        return Err(Error::Config(
            "the radial oracle covers only N = 3, alpha = 2 with the quadratic nonlinearity".into(),
        ));
    }
    Ok(())
}

fn execute(verb: Verb, run: &mut Run) -> Result<Outcome, Error> {
    let config = run.config.clone();
    match verb {
        Verb::Solve | Verb::SolveAutonomous => {
            let plan = run.out.stage("plan", || config.plan())?;
            run.fingerprint = Some(plan.fingerprint());
            let problem = if verb == Verb::Solve {
                config.problem_on(plan)?
            } else {
                config.autonomous_problem_on(plan)?
            };
            let result = run.out.stage("solve", || {
                if verb == Verb::Solve {
                    solve_ground_state(&problem, &config.init, &config.solver)
                } else {
                    solve_autonomous(&problem, &config.init, &config.solver)
                }
            })?;
            write_solve(run, &result)
        }
        Verb::Verify => {
            let mut loaded = Vec::new();
            if !config.verify.solutions.is_empty() {
                let plan = config.plan()?;
                run.fingerprint = Some(plan.fingerprint());
                for path in &config.verify.solutions {
                    loaded.push(LoadedSolution {
                        label: path.display().to_string(),
                        problem: config.problem_on(plan.clone())?,
                        field: grid::read_field_dump(path)?,
                    });
                }
            }
            let report = run.out.stage("battery", || {
                verify_battery(&config.verify.battery, &loaded)
            })?;
            let assumptions = run.out.stage("assumptions", || {
                check_assumptions(
                    &config.potential_spec()?,
                    &config.nonlin_spec()?,
                    &config.verify.assumptions,
                )
            })?;
            run.out.write_json("battery.json", &report)?;
            run.out.write_json("assumptions.json", &assumptions)?;
            for c in &report.checks {
                let kind = if c.hard { "hard" } else { "soft" };
                let margin = c
                    .margin
                    .map(|m| format!("{m:.3e}"))
                    .unwrap_or_else(|| "-".into());
                println!("{:?} ({kind}) {} margin = {margin}", c.status, c.check);
            }
            Ok(if report.passed() {
                Outcome::Ok
            } else {
                Outcome::VerificationFailed
            })
        }
        Verb::SweepEps => {
            let plan = config.plan()?;
            run.fingerprint = Some(plan.fingerprint());
            let problem = config.problem_on(plan)?;
            let result = run.out.stage("sweep", || {
                sweep_epsilon(
                    &problem,
                    &config.sweep.eps,
                    &config.init,
                    &config.solver,
                    config.sweep.warm_start,
                )
            })?;
            let x0 = problem.potential().minimizer();
            write_sweep(run, "sweep_eps", &result, &x0)
        }
        Verb::SweepLambda => {
            let plan = config.plan()?;
            run.fingerprint = Some(plan.fingerprint());
            let autonomous = config.autonomous_problem_on(plan)?;
            let pot = config.potential_spec()?;
            let bound = if pot.is_constant() {
                warn!("constant potential: no path bounds are computed");
                None
            } else {
                Some(&pot)
            };
            let result = run.out.stage("sweep", || {
                sweep_lambda(
                    &autonomous,
                    &config.sweep.lambda,
                    bound,
                    &config.init,
                    &config.solver,
                )
            })?;
            write_sweep(run, "sweep_lambda", &result, &vec![0.0; config.grid.dim])
        }
        Verb::Oracle => {
            require_pekar(&config)?;
            if !matches!(config.potential.variant, PotentialVariant::Constant { v_inf } if v_inf == 1.0)
            {
                return Err(Error::Config(
                    "the radial oracle needs the constant potential V = 1".into(),
                ));
            }
            let result = run
                .out
                .stage("oracle", || radial_oracle_pekar(&config.oracle))?;
            run.out.write_json("oracle.json", &result)?;
            println!(
                "oracle m = {:.12e}  Pohozaev residual = {:.2e}  sweeps = {}",
                result.m, result.pohozaev_residual, result.iterations
            );
            Ok(Outcome::Ok)
        }
        Verb::Report => {
            let plan = run.out.stage("plan", || config.plan())?;
            run.fingerprint = Some(plan.fingerprint());
            let pot = config.potential_spec()?;
            let nl = config.nonlin_spec()?;
            let (s, c1) = config.diagnostic_inputs()?;
            let diagnostics = match diagnostic_constants(&pot, s, c1) {
                Ok(d) => Some(d),
                Err(e) => {
                    warn!("diagnostic constants unavailable: {e}");
                    None
                }
            };
            let assumptions = check_assumptions(&pot, &nl, &config.verify.assumptions)?;
            let report = json!({
                "potential": pot,
                "nonlinearity": nl,
                "v_inf": pot.v_inf(),
                "v_max": pot.v_max(),
                "v_min": pot.v_min(),
                "minimizer": pot.minimizer(),
                "truncation_radius": plan.truncation_radius(),
                "diagnostics": diagnostics,
                "assumptions": assumptions,
            });
            run.out.write_json("report.json", &report)?;
            run.out.write_json("config.resolved.json", &config)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(Outcome::Ok)
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<Config, Error> {
    let mut config = Config::from_path(path)?;
    if let Some(seed) = seed {
        config.solver.seed = seed;
        config.verify.battery.seed = seed;
        config.verify.assumptions.seed = seed;
    }
    config.resolved()
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let config = load_config(&cli.config, cli.seed)?;
    let threads = rayon::current_num_threads();
    let mut run = Run {
        config,
        out: RunDir::create(&cli.out)?,
        fingerprint: None,
    };
    let outcome = match execute(cli.verb, &mut run) {
        Ok(o) => o,
        Err(e) => {
            // Outputs written before the failure still get a manifest.
            let status = format!("error: {e}");
            let seed = run.config.solver.seed;
            if let Err(m) = run.out.finish(
                TOOL,
                cli.verb.name(),
                &run.config,
                run.fingerprint,
                seed,
                threads,
                &status,
            ) {
                warn!("manifest not written: {m}");
            }
            return Err(e);
        }
    };
    let seed = run.config.solver.seed;
    run.out.finish(
        TOOL,
        cli.verb.name(),
        &run.config,
        run.fingerprint,
        seed,
        threads,
        outcome.status(),
    )?;
    info!("{} finished: {}", cli.verb.name(), outcome.status());
    Ok(outcome.code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("LOG", "info")).init();
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            error!("thread pool: {e}");
            return ExitCode::from(exit::CONFIG);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
