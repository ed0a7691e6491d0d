mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Formulation, Overrides, RunConfig, Settings};
use error::CliError;

/// Grade long answers by checking each rubric item as an entailment.
#[derive(Debug, Parser)]
#[command(name = "rubricnli", version)]
struct Cli {
    /// TOML run configuration. Flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Corpus JSON file.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for single-seed commands; replaces the protocol seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// trainable, generative, lexical or oracle.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// csv, json or markdown (grade: markdown or plain).
    #[arg(long, global = true)]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check corpus invariants; prints one violation per line.
    Validate { path: Option<PathBuf> },
    /// Corpus counts.
    Stats,
    /// Per-question train/val/test split.
    Split {
        /// Hold out this question as the test set.
        #[arg(long)]
        holdout: Option<String>,
        /// Keep only this fraction of each question's training responses.
        #[arg(long)]
        subsample: Option<String>,
    },
    /// Generate a synthetic corpus with planted labels.
    Synth,
    /// Fit a trainable backend on a fresh split.
    Train,
    /// Predict rubric-item labels.
    Predict {
        /// Saved model from `train`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Split file from `split`; restricts prediction to --partition.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        partition: Option<String>,
    },
    /// Score responses and write per-response feedback.
    Grade {
        /// Predictions JSONL from `predict`; otherwise the backend predicts.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Multi-seed benchmark.
    Eval {
        #[arg(long, value_enum)]
        formulation: Option<Formulation>,
        /// Score predictor for the score formulation.
        #[arg(long)]
        predictor: Option<String>,
    },
    /// Leave-one-question-out evaluation.
    Coldstart,
    /// Training-fraction learning curve.
    Sweep,
    /// Rubric vs score formulation deltas from two result JSON files.
    Compare {
        #[arg(long)]
        rubric: PathBuf,
        #[arg(long)]
        score: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.corpus.is_some() {
        config.corpus = cli.corpus;
    }
    let backend = cli
        .backend
        .map(|b| b.parse().map_err(|e: rubricnli::entailment::ConfigError| CliError::Config(e.0)))
        .transpose()?;
    let flags = Overrides { out: cli.out, seed: cli.seed, backend, format: cli.format };
    let settings = Settings::resolve(config, flags)?;
    match &cli.command {
        Command::Validate { path } => commands::validate(&settings, path.as_deref()),
        Command::Stats => commands::stats(&settings),
        Command::Split { holdout, subsample } => commands::split(&settings, holdout.as_deref(), subsample.as_deref()),
        Command::Synth => commands::synth(&settings),
        Command::Train => commands::train(&settings),
        Command::Predict { model, split, partition } => {
            commands::predict(&settings, model.as_deref(), split.as_deref(), partition.as_deref())
        }
        Command::Grade { predictions, model } => commands::grade(&settings, predictions.as_deref(), model.as_deref()),
        Command::Eval { formulation, predictor } => commands::eval(&settings, *formulation, predictor.as_deref()),
        Command::Coldstart => commands::coldstart(&settings),
        Command::Sweep => commands::sweep(&settings),
        Command::Compare { rubric, score } => commands::compare(&settings, rubric, score),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let err = CliError::Config(first.trim_start_matches("error: ").to_string());
            eprintln!("{}", err.to_line());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(e.exit_code())
        }
    }
}
