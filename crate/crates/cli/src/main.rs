// SPDX-License-Identifier: MIT OR Apache-2.0

//! `crossmetric` command-line pipeline.
//!
//! Exit status: 0 on success, 2 for usage or input errors, 3 for runtime
//! and numeric failures.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manifest::{CommandKind, DataFormat, Overrides, RunManifest};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<crossmetric::Error> for CliError {
    fn from(e: crossmetric::Error) -> Self {
        if e.is_input_error() {
            CliError::Input(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

#[derive(Parser)]
#[command(
    name = "crossmetric",
    version,
    about = "Forecasting-based anomaly detection for multivariate metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on --data; writes the model file and loss history.
    Train(RunArgs),
    /// Score every timestamp of --data with --model.
    Detect(RunArgs),
    /// Sweep thresholds over --scores against --labels.
    Evaluate(RunArgs),
    /// Time training and prediction across window sizes on --data.
    Bench(RunArgs),
    /// Write a labelled synthetic dataset to --out.
    Generate(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML file with manifest keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Label file (one 0/1 per line) or CSV with a trailing `label` column.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Score CSV written by `detect`.
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<DataFormat>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Window size [default: 32].
    #[arg(long)]
    omega: Option<usize>,
    /// Training stride [default: 5].
    #[arg(long)]
    tau_train: Option<usize>,
    /// Test stride [default: 1].
    #[arg(long)]
    tau_test: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: 1].
    #[arg(long)]
    threads: Option<usize>,
    /// Threshold grid spacing [default: 0.1].
    #[arg(long)]
    threshold_step: Option<f64>,
    /// Feed per-metric window means to the MLP instead of interactions.
    #[arg(long)]
    ablate_cm: bool,
    /// Sum each interaction vector to a scalar.
    #[arg(long)]
    pooled_interactions: bool,
    /// Apply ReLU to the output layer too.
    #[arg(long)]
    relu_output: bool,
    /// Train on the unsquared Euclidean error.
    #[arg(long)]
    l2_loss: bool,
    /// Skip point adjustment.
    #[arg(long)]
    no_adjust: bool,
}

impl RunArgs {
    fn split(self) -> (Option<PathBuf>, Overrides) {
        let o = Overrides {
            data: self.data,
            labels: self.labels,
            model: self.model,
            scores: self.scores,
            format: self.format,
            out: self.out,
            omega: self.omega,
            tau_train: self.tau_train,
            tau_test: self.tau_test,
            seed: self.seed,
            threads: self.threads,
            threshold_step: self.threshold_step,
            ablate_cm: self.ablate_cm,
            pooled_interactions: self.pooled_interactions,
            relu_output: self.relu_output,
            l2_loss: self.l2_loss,
            no_adjust: self.no_adjust,
        };
        (self.config, o)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (kind, args) = match cli.command {
        Command::Train(a) => (CommandKind::Train, a),
        Command::Detect(a) => (CommandKind::Detect, a),
        Command::Evaluate(a) => (CommandKind::Evaluate, a),
        Command::Bench(a) => (CommandKind::Bench, a),
        Command::Generate(a) => (CommandKind::Generate, a),
    };
    let (config, overrides) = args.split();
    let explicit_omega = overrides.omega;
    let mut m = RunManifest::resolve(kind, config.as_deref(), overrides)?;
    match kind {
        CommandKind::Train => commands::cmd_train(&m),
        CommandKind::Detect => commands::cmd_detect(&mut m, explicit_omega),
        CommandKind::Evaluate => commands::cmd_evaluate(&m),
        CommandKind::Bench => commands::cmd_bench(&m),
        CommandKind::Generate => commands::cmd_generate(&m),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
