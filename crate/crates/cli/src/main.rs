use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::RunConfig;

/// Geometric phase integrals: critical points, stationary-phase
/// predictions, numerical phase scans and the irrationality pipeline.
///
/// Exit status: 0 on success, 2 when the verdict is inconclusive, 1 on errors.
#[derive(Parser)]
#[command(name = "phaselab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact path (overrides output.path); stdout when neither is set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Caps the worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// QMC shift seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Frequency for oracle and beta-flow.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Coupling strength for beta-flow.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Expansion order for beta-flow.
    #[arg(long = "J", global = true)]
    order: Option<usize>,
    /// Tail tolerance for theta and irrat.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Classified critical points of L (JSON).
    Critpoints,
    /// Stationary-phase verdict for the phase of I(h) (JSON).
    Predict,
    /// One quadrature value of I(h) (JSON).
    Oracle,
    /// Phase of I(h) along the h schedule (CSV with a JSON footer).
    PhaseScan,
    /// Irrationality report (JSON).
    Irrat,
    /// Critical-family determinants and terms (CSV with a JSON footer).
    Theta,
    /// Coupling expansion against the direct integral (CSV with a JSON footer).
    BetaFlow,
    /// Prints the digamma function at X.
    Digamma {
        #[arg(allow_negative_numbers = true)]
        x: f64,
    },
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Critpoints => "critpoints",
            Command::Predict => "predict",
            Command::Oracle => "oracle",
            Command::PhaseScan => "phase-scan",
            Command::Irrat => "irrat",
            Command::Theta => "theta",
            Command::BetaFlow => "beta-flow",
            Command::Digamma { .. } => "digamma",
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.quadrature.seed = seed;
    }
    if let Some(h) = cli.h {
        cfg.h = Some(h);
        cfg.beta_flow.h = h;
    }
    if let Some(beta) = cli.beta {
        cfg.beta_flow.beta = Some(beta);
    }
    if let Some(j) = cli.order {
        cfg.beta_flow.order = j;
    }
    if let Some(tol) = cli.tol {
        cfg.theta.tol = tol;
        cfg.irrat.report.theta_tol = tol;
    }
    if let Some(out) = &cli.out {
        cfg.output.path = Some(out.clone());
    }
    cfg.validate().context("after applying command-line overrides")?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    if let Command::Digamma { x } = cli.command {
        println!("{}", phaselab::fields::digamma(x)?);
        return Ok(false);
    }
    let cfg = load_config(cli)?;
    let outcome = match cli.command {
        Command::Critpoints => commands::critpoints(&cfg)?,
        Command::Predict => commands::predict(&cfg)?,
        Command::Oracle => commands::oracle(&cfg)?,
        Command::PhaseScan => commands::phase_scan(&cfg)?,
        Command::Irrat => commands::irrat(&cfg)?,
        Command::Theta => commands::theta(&cfg)?,
        Command::BetaFlow => commands::beta_flow(&cfg)?,
        Command::Digamma { .. } => unreachable!("handled above"),
    };
    match &cfg.output.path {
        Some(path) => {
            output::write_atomic(path, &outcome.artifact)?;
            println!("{} -> {}", outcome.summary, path.display());
        }
        None => {
            print!("{}", outcome.artifact);
            eprintln!("{}", outcome.summary);
        }
    }
    Ok(outcome.inconclusive)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error ({}): {e:#}", cli.command.name());
            ExitCode::FAILURE
        }
    }
}
