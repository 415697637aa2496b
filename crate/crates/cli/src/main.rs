mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{ClassifyArgs, EffortArgs, EvaluateArgs, FitArgs, SimulateArgs};

/// Classify VMS pings as fishing or steaming with hidden Markov models and
/// map the resulting fishing effort.
#[derive(Debug, Parser)]
#[command(name = "vmsfish", version)]
pub struct Cli {
    /// TOML run configuration; command-line flags take precedence
    #[arg(long, global = true, display_order = 100, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed for every random draw [default: 1]
    #[arg(long, global = true, display_order = 100, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads [default: available processors]
    #[arg(long, global = true, display_order = 100, value_name = "N")]
    pub jobs: Option<usize>,
    /// Only print errors
    #[arg(long, global = true, display_order = 100)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a labelled fleet: ping CSV plus per-step truth CSV
    Simulate(SimulateArgs),
    /// Fit one model per grouping unit and write model files
    Fit(FitArgs),
    /// Decode every trip with its unit's model and write per-step activities
    Classify(ClassifyArgs),
    /// Score methods against ground truth and write a comparison table
    Evaluate(EvaluateArgs),
    /// Grid the fishing hours of classified trips
    EffortMap(EffortArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
