//! Batch front end for the cost-sensitive intrusion detection toolkit.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "csids",
    version,
    about = "Cost-sensitive intrusion detection experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw traffic files, fit the encoder, and write dataset caches.
    Prepare(CommonArgs),
    /// Train the configured model family on the prepared training cache.
    Train(CommonArgs),
    /// Staged 10-fold cross-validation over the hyperparameter grids.
    Crossval(CommonArgs),
    /// Score the trained model on every test cache, both decision modes.
    Evaluate(CommonArgs),
    /// Sweep the parametric cost matrix over the α grid.
    #[command(name = "sweep-alpha")]
    SweepAlpha(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the model family (mlp | linear | gmm | naive-bayes).
    #[arg(long)]
    family: Option<String>,
    /// Override the α grid lower bound.
    #[arg(long)]
    alpha_min: Option<f64>,
    /// Override the α grid upper bound.
    #[arg(long)]
    alpha_max: Option<f64>,
    /// Override the α grid step.
    #[arg(long)]
    alpha_step: Option<f64>,
    /// Work on a stratified subsample of this many records.
    #[arg(long)]
    subsample: Option<usize>,
    /// Accept cost matrices with nonzero diagonals or negative entries.
    #[arg(long)]
    allow_nonstandard_cost: bool,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            family: self.family.clone(),
            alpha_min: self.alpha_min,
            alpha_max: self.alpha_max,
            alpha_step: self.alpha_step,
            subsample: self.subsample,
            allow_nonstandard_cost: self.allow_nonstandard_cost,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let (name, args) = match &cli.command {
        Command::Prepare(args) => ("prepare", args),
        Command::Train(args) => ("train", args),
        Command::Crossval(args) => ("crossval", args),
        Command::Evaluate(args) => ("evaluate", args),
        Command::SweepAlpha(args) => ("sweep-alpha", args),
    };
    let result = RunConfig::load(&args.config, &args.overrides())
        .and_then(|config| commands::run_command(name, config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code as u8)
        }
    }
}
