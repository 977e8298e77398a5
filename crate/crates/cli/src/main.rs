//! `slime`: train black boxes, explain instances, sweep bandwidths and run
//! the exact reweighting check from the command line.
//!
//! Exit status: 0 success, 1 failed check, 2 invalid input or
//! configuration, 3 training did not converge, 4 I/O error.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slime::{ConversionKind, Error, Method};

#[derive(Parser)]
#[command(
    name = "slime",
    version,
    about = "Local surrogate explanations of black-box classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a black box on a labelled CSV and write it as JSON.
    Train(TrainArgs),
    /// Explain one dataset row and write the explanation as JSON.
    Explain(ExplainArgs),
    /// Explain one row over a log-spaced σ grid and write a CSV table.
    Sweep(SweepArgs),
    /// Compare the kernel-weighted and reweighted exact minimizers.
    LemmaCheck(LemmaCheckArgs),
    /// LIME neighborhood weights and explanations at two bandwidths.
    Paradox(ParadoxArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// key = value file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV with a header row; the last column is the 0/1 label.
    #[arg(long)]
    data: Option<String>,
    /// logistic, forest or mlp.
    #[arg(long)]
    kind: Option<commands::ModelKind>,
    #[arg(long)]
    out: Option<String>,
    /// L1 strength (logistic).
    #[arg(long)]
    l1: Option<f64>,
    /// Iteration cap (logistic).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Convergence tolerance (logistic, mlp).
    #[arg(long)]
    tol: Option<f64>,
    /// Number of trees (forest).
    #[arg(long)]
    trees: Option<usize>,
    /// Maximum tree depth (forest).
    #[arg(long)]
    depth: Option<usize>,
    /// Hidden units (mlp).
    #[arg(long)]
    hidden: Option<usize>,
    /// Epoch cap (mlp).
    #[arg(long)]
    epochs: Option<usize>,
    /// Step size (mlp).
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Seed (forest, mlp).
    #[arg(long)]
    seed: Option<u64>,
}

/// Model, data row and neighborhood settings shared by the explainers.
#[derive(Args)]
struct TargetArgs {
    /// key = value file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model JSON written by `train`.
    #[arg(long)]
    model: Option<String>,
    /// CSV holding the target row.
    #[arg(long)]
    data: Option<String>,
    /// 0-based row of the target in the data.
    #[arg(long)]
    row: Option<usize>,
    /// Segmentation CSV (`feature,segment`); one segment per feature if absent.
    #[arg(long)]
    segments: Option<String>,
    /// Number of neighbors.
    #[arg(long)]
    n: Option<usize>,
    /// Number of surrogate features kept.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// lime or slime.
    #[arg(long)]
    method: Option<Method>,
    /// tabular (s-LIME only) or segmented.
    #[arg(long)]
    conversion: Option<ConversionKind>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    conversion: Option<ConversionKind>,
    /// Log-spaced grid `lo:hi:points`, e.g. `1e-3:1e2:20`.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Args)]
struct LemmaCheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// Number of binary surrogate features, at most 14.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ParadoxArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// Two bandwidths, e.g. `0.1,100`.
    #[arg(long)]
    sigmas: Option<String>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 4,
        Error::NonConvergence { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Explain(a) => commands::explain(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::LemmaCheck(a) => commands::lemma_check(a),
        Command::Paradox(a) => commands::paradox(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
