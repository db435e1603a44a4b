//! `osr`: generate synthetic open-set data, train the evidential network
//! with the HSIC debiasing constraint, evaluate novelty detection and check
//! the optimizer certificates.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 runtime or
//! numeric failure, 3 certificate violation.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(
    name = "osr",
    version,
    about = "Evidential open-set recognition experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// JSON experiment configuration layered over the built-in defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one field, e.g. `--set optimizer.gamma=0.01`. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic dataset (JSON lines plus metadata) into a directory.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a network; writes checkpoint.json and trace.csv.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Dataset directory from `generate`; generated in memory if omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the test split and write the metrics JSON.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the convex oracle suite and check every certificate.
    VerifyBounds {
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Start every problem from a zero multiplier at the unconstrained
        /// minimiser instead of the warm start.
        #[arg(long)]
        cold_start: bool,
        /// Directory for bounds.json and per-problem trace CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge metrics files (and training traces) into one CSV table.
    Report {
        #[arg(long, required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long)]
        trace: Vec<PathBuf>,
        /// Run names, one per metrics file; defaults to the file stems.
        #[arg(long)]
        label: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(args: &ConfigArgs) -> CliResult<osr_core::experiment::ExperimentConfig> {
    config::load(args.config.as_deref(), &args.overrides)
}

fn run(cli: Cli) -> CliResult<serde_json::Value> {
    match cli.command {
        Command::Generate { config, out } => commands::generate_cmd(&load(&config)?, &out),
        Command::Train { config, data, out } => {
            commands::train_cmd(&load(&config)?, data.as_deref(), &out)
        }
        Command::Eval {
            config,
            data,
            checkpoint,
            out,
        } => commands::eval_cmd(&load(&config)?, data.as_deref(), &checkpoint, &out),
        Command::VerifyBounds {
            steps,
            cold_start,
            out,
        } => commands::verify_bounds_cmd(steps, cold_start, out.as_deref()),
        Command::Report {
            metrics,
            trace,
            label,
            out,
        } => commands::report_cmd(&metrics, &trace, &label, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return CliError::Usage(e.kind().to_string()).report();
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => e.report(),
    }
}
