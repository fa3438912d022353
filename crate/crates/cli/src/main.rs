//! Batch command-line front end for the QoE-LSTM toolkit.
//!
//! Every experiment is a sequence of commands over plain files: generate or
//! ingest a corpus, train per-fold models, predict, score, sweep
//! architectures, pool overall scores. There is no daemon and no database;
//! all state lives in the output directories, so any run can be audited or
//! replayed later.
//!
//! Conventions shared by all commands:
//!
//! - Exit code 0 on success. On failure, exactly one machine-parsable JSON
//!   line goes to stderr: `{"error": "<kind>", "message": "<detail>"}`.
//!   Flag-parsing problems use kind `usage` and exit code 2.
//! - All randomness derives from one master seed: the global `--seed` flag,
//!   else the `QOE_LSTM_SEED` environment variable, else the seed embedded
//!   in a config file, else 0.
//! - Reruns with identical flags and seed reproduce identical output files
//!   byte for byte; pass `--deterministic` to also omit the one
//!   non-reproducible field (provenance timestamps).
//! - `--jobs` bounds the worker threads used by fold-parallel commands
//!   (`evaluate`, `sweep`); outputs are merged in fold order, so the level
//!   of parallelism never changes any output byte.

mod cmd_evaluate;
mod cmd_pool;
mod cmd_predict;
mod cmd_sweep;
mod cmd_synth;
mod cmd_train;
mod common;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use qoe_lstm_core::{Error, Result};

/// Train and evaluate per-second streaming-QoE sequence regressors.
#[derive(Debug, Parser)]
#[command(name = "qoe-lstm", version, about)]
struct Cli {
    /// Master seed for all randomness. Falls back to the QOE_LSTM_SEED
    /// environment variable, then to any seed in a config file, then to 0.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Upper bound on parallel fold workers (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Omit timestamps from outputs so reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus with known ground-truth QoE.
    Synth(cmd_synth::SynthArgs),
    /// Train one model per cross-validation fold.
    Train(cmd_train::TrainArgs),
    /// Predict the per-second QoE series for one trace.
    Predict(cmd_predict::PredictArgs),
    /// Score per-fold models on their test videos and write a report.
    Evaluate(cmd_evaluate::EvaluateArgs),
    /// Train and evaluate a grid of layer/unit architectures.
    Sweep(cmd_sweep::SweepArgs),
    /// Correlate pooled per-video predictions with overall ground truth.
    Pool(cmd_pool::PoolArgs),
}

/// Seed and output-hygiene settings shared by every command.
#[derive(Debug, Clone, Copy)]
pub struct Ctx {
    /// Seed from `--seed` or the environment; `None` defers to config
    /// files and finally to 0.
    pub seed: Option<u64>,
    /// When set, provenance timestamps are omitted.
    pub deterministic: bool,
}

impl Ctx {
    /// The effective seed when no config file supplies one.
    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// Resolve the master seed: explicit flag first, then QOE_LSTM_SEED.
fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("QOE_LSTM_SEED") {
        Ok(text) => text.trim().parse::<u64>().map(Some).map_err(|_| {
            Error::InvalidConfig(format!(
                "QOE_LSTM_SEED must be an unsigned integer, got '{text}'"
            ))
        }),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::InvalidConfig("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("cannot size worker pool: {e}")))?;
    }
    let ctx = Ctx {
        seed: resolve_seed(cli.seed)?,
        deterministic: cli.deterministic,
    };
    match cli.command {
        Command::Synth(args) => cmd_synth::run(&args, &ctx),
        Command::Train(args) => cmd_train::run(&args, &ctx),
        Command::Predict(args) => cmd_predict::run(&args, &ctx),
        Command::Evaluate(args) => cmd_evaluate::run(&args, &ctx),
        Command::Sweep(args) => cmd_sweep::run(&args, &ctx),
        Command::Pool(args) => cmd_pool::run(&args, &ctx),
    }
}

/// Print one machine-parsable error line to stderr. JSON string escaping
/// keeps the line single even when the message contains newlines.
fn report_error(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            err.exit()
        }
        Err(err) => {
            report_error("usage", &err.to_string());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            report_error(err.kind(), &err.to_string());
            ExitCode::from(1)
        }
    }
}
