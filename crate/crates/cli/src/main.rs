mod config;
mod experiment;
mod kernels;
mod output;
mod simulate;
mod synthesize;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mbmlab_core::Error;

use crate::config::RunConfig;
use crate::experiment::ExperimentName;

#[derive(Parser)]
#[command(name = "mbmlab", version, about = "Simulate multifractional Brownian motion and check its regularity")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and check the kernel tables.
    Synthesize,
    /// Write X, Y and optionally B(., theta) on a grid.
    Simulate,
    /// Run the covariance oracle and kernel checks.
    Verify,
    /// Run one of the regularity experiments.
    Experiment {
        #[arg(value_enum)]
        name: ExperimentName,
    },
}

pub enum Outcome {
    Pass,
    Fail(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(why)) => {
            eprintln!("mbmlab: {why}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("mbmlab: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Numerical breakdowns during a run count as failures; everything else is a configuration
/// or IO problem.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Quadrature(_) | Error::Singular(_) | Error::Insufficient(_)) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(n) = cli.threads {
        cfg.threads = Some(n);
    }
    if let Some(n) = cfg.threads {
        anyhow::ensure!(n > 0, "threads must be positive");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Synthesize => synthesize::run(&cfg),
        Command::Simulate => simulate::run(&cfg),
        Command::Verify => verify::run(&cfg),
        Command::Experiment { name } => experiment::run(&cfg, name),
    }
}
