//! `cuffless` — measurement records in, features, prompts, and evaluation
//! reports out.
//!
//! Subcommands mirror the pipeline stages so fine-tuning can happen between
//! `build-prompts` and `evaluate`:
//!
//! - `synth`          generate a synthetic cohort with profiles
//! - `extract`        records -> 31-feature table (CSV)
//! - `build-prompts`  feature table -> instruction-tuning JSONL per context
//! - `evaluate`       feature table -> cross-validated report + plot data,
//!                    with optional alpha / training-size sweeps

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
#[error("input path {0} does not exist")]
pub struct MissingInput(PathBuf);

#[derive(Debug, Parser)]
#[command(name = "cuffless", version, about = "Cuffless BP estimation pipeline")]
struct Cli {
    /// Optional TOML config file (flags take precedence over it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for batch stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Ndjson,
    CsvDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ContextArg {
    Basic,
    Knowledge,
    KnowledgeUser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GroupingArg {
    Table1,
    AppendixB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    Zero,
    Dtr,
    Adaboost,
    Endpoint,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepArg {
    Alpha,
    TrainSize,
}

#[derive(Debug, Parser)]
struct SynthArgs {
    /// Output directory for records and profiles.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    subjects: usize,
    #[arg(long, default_value_t = 120.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 1000.0)]
    fs: f64,
    #[arg(long, default_value_t = 0.005)]
    noise_std: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Ndjson)]
    format: FormatArg,
}

#[derive(Debug, Parser)]
struct ExtractArgs {
    /// Record file (NDJSON) or directory (csv-dir layout).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Ndjson)]
    format: FormatArg,
    /// Subject profile CSV; omit to extract without profiles.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Output feature table (CSV).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum record duration in seconds.
    #[arg(long, default_value_t = 10.0)]
    min_duration_s: f64,
    /// Minimum retained beats per record.
    #[arg(long, default_value_t = 10)]
    min_beats: usize,
}

#[derive(Debug, Parser)]
struct PromptArgs {
    /// Feature table produced by `extract`.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for the per-level JSONL files.
    #[arg(long)]
    out: PathBuf,
    /// Context levels to render (default: all three).
    #[arg(long, value_enum, value_delimiter = ',')]
    levels: Vec<ContextArg>,
    #[arg(long, value_enum)]
    grouping: Option<GroupingArg>,
    /// Leave the output field empty (inference prompts, not tuning data).
    #[arg(long)]
    no_responses: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Parser)]
struct EvaluateArgs {
    /// Feature table produced by `extract`.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for the report and plot data.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    #[arg(long, value_enum)]
    context: Option<ContextArg>,
    #[arg(long, value_enum)]
    grouping: Option<GroupingArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Split folds by record instead of by subject.
    #[arg(long)]
    record_level_split: bool,
    #[arg(long, value_enum)]
    sweep: Option<SweepArg>,
    /// Training fractions for `--sweep train-size`.
    #[arg(long, value_delimiter = ',')]
    fractions: Vec<f64>,
    #[arg(long)]
    endpoint_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Maximum in-flight endpoint requests.
    #[arg(long)]
    endpoint_concurrency: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort (records plus profiles).
    Synth(SynthArgs),
    /// Extract the 31-feature table from measurement records.
    Extract(ExtractArgs),
    /// Render context-enhanced prompts / instruction-tuning datasets.
    BuildPrompts(PromptArgs),
    /// Run a cross-validated estimation experiment or a sweep.
    Evaluate(EvaluateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(jobs) = cli.jobs {
        // Ignore the error if a pool was already installed.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }

    let outcome = (|| -> anyhow::Result<()> {
        let file_cfg = config::load_file_config(cli.config.as_deref())?;
        match cli.command {
            Command::Synth(args) => commands::synth(args, &file_cfg),
            Command::Extract(args) => commands::extract(args, &file_cfg),
            Command::BuildPrompts(args) => commands::build_prompts(args, &file_cfg),
            Command::Evaluate(args) => commands::evaluate(args, &file_cfg),
        }
    })();

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.is::<MissingInput>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
