mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lrom_core::Execution;

use crate::commands::Context;
use crate::config::Config;
use crate::failure::Failure;

/// POD-Galerkin and Leray reduced-order models of 1D viscous Burgers.
///
/// Every command works inside `<out-dir>/run-<hash>`, where the hash is taken
/// over the effective configuration.
#[derive(Debug, Parser)]
#[command(name = "lrom", version)]
struct Cli {
    /// TOML configuration file (sections fom, pod, rom, calibrate, bench, report).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base directory for run directories.
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,

    /// Seed for the initial-condition perturbation and ROM start noise.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the parallel stages (1 runs them sequentially).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override a configuration value, e.g. `--set rom.r=4`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full-order model and write the snapshot bundle.
    Generate,
    /// Compute the POD basis and eigenvalue spectrum.
    Pod,
    /// Assemble the reduced operators (and the filtered tensor for fe_level).
    Assemble,
    /// Integrate the configured ROM and write trajectory and diagnostics.
    Run,
    /// Calibrate the filter radius against the snapshot mean kinetic energy.
    Calibrate,
    /// Time the online right-hand side and ROM filter across ranks.
    Bench,
    /// Recompute diagnostics from a stored trajectory and print a summary.
    Report,
}

fn execution(threads: Option<usize>) -> Result<Execution, Failure> {
    match threads {
        Some(0) => Err(Failure::validation("--threads must be at least 1")),
        Some(1) => Ok(Execution::Sequential),
        Some(n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::validation(format!("cannot configure {n} threads: {e}")))?;
            #[cfg(not(feature = "parallel"))]
            eprintln!("warning: built without the parallel feature; ignoring --threads {n}");
            Ok(Execution::Parallel)
        }
        None => Ok(Execution::Parallel),
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let exec = execution(cli.threads)?;
    let config = Config::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    let ctx = Context::prepare(config, &cli.out_dir, exec)?;
    match cli.command {
        Command::Generate => commands::generate(&ctx),
        Command::Pod => commands::pod(&ctx),
        Command::Assemble => commands::assemble(&ctx),
        Command::Run => commands::run(&ctx),
        Command::Calibrate => commands::calibrate(&ctx),
        Command::Bench => commands::bench(&ctx),
        Command::Report => commands::report(&ctx),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.code)
        }
    }
}
