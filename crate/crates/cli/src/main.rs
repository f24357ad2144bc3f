//! `taskinfo`: batch experiments on task information and task distances.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{load, Versioned};
use error::CliResult;
use output::Outputs;

#[derive(Parser)]
#[command(name = "taskinfo", version, about = "Information complexity of learning tasks and asymmetric task distances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML, `version = 1`).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replaces the config's top-level `seed`.
    #[arg(long)]
    seed_override: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Structure function of one task with the oracle or variational engine.
    StructureFn(Common),
    /// Annealed variational sweep over a beta schedule for several tasks.
    BetaSweep(Common),
    /// Asymmetric distances between every ordered pair of tasks.
    DistanceMatrix(Common),
    /// A single PAC-Bayes bound and/or an empirical coverage run.
    PacBayes(Common),
    /// Epsilon-local annealing over a finite posterior grid.
    Anneal(Common),
    /// Writes task datasets as CSV.
    GenTask(Common),
}

fn run_with<C, F>(common: &Common, f: F) -> CliResult<Vec<PathBuf>>
where
    C: Versioned,
    F: FnOnce(&config::Loaded<C>, &Path) -> CliResult<Outputs>,
{
    let loaded = load::<C>(&common.config, common.seed_override)?;
    f(&loaded, &common.out)?.commit()
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    let common = match &cli.command {
        Command::StructureFn(c)
        | Command::BetaSweep(c)
        | Command::DistanceMatrix(c)
        | Command::PacBayes(c)
        | Command::Anneal(c)
        | Command::GenTask(c) => c,
    };
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(error::CliError::config("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| error::CliError::config(e.to_string()))?;
    }
    match &cli.command {
        Command::StructureFn(c) => run_with(c, commands::structure_fn),
        Command::BetaSweep(c) => run_with(c, commands::beta_sweep),
        Command::DistanceMatrix(c) => run_with(c, commands::distance),
        Command::PacBayes(c) => run_with(c, commands::pac_bayes),
        Command::Anneal(c) => run_with(c, commands::anneal_cmd),
        Command::GenTask(c) => run_with(c, commands::gen_task),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("taskinfo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
