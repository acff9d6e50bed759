mod codec_cmd;
mod config;
mod dataset_cmd;
mod eval_cmd;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;

/// Mixed text-level and word-level information extraction: codec, scoring,
/// dataset tooling and evaluation runs.
#[derive(Debug, Parser)]
#[command(name = "uie", version)]
struct Cli {
    /// TOML config file (task profiles, instruction-word profile, backend, cache, seed).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn JSONL records into serialized output strings, one per line.
    Encode(codec_cmd::EncodeArgs),
    /// Parse serialized output strings (tolerantly) into JSONL records.
    Decode(codec_cmd::DecodeArgs),
    /// Score predicted outputs against a gold dataset.
    Score(eval_cmd::ScoreArgs),
    /// Run a backend over a dataset, or re-render a finished run.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Dataset conversion, splitting, sampling, statistics and construction.
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Evaluate a backend on a dataset and write a run directory.
    Run(Box<eval_cmd::RunArgs>),
    /// Print the report of a run directory.
    Report(eval_cmd::ReportArgs),
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Convert between the canonical dataset and other layouts.
    Convert(dataset_cmd::ConvertArgs),
    /// Random train/test partition.
    Split(dataset_cmd::SplitArgs),
    /// Random subset without replacement.
    Sample(dataset_cmd::SampleArgs),
    /// Label histograms and unit counts.
    Stats(dataset_cmd::StatsArgs),
    /// Rule-based candidate extraction over a news corpus.
    TcreeExtract(dataset_cmd::ExtractArgs),
    /// Machine-label extracted candidates as draft samples.
    DraftLabel(dataset_cmd::DraftArgs),
    /// Build a baseline gazetteer from a training set.
    Gazetteer(dataset_cmd::GazetteerArgs),
}

/// Backend selection shared by `eval run` and `dataset draft-label`.
#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// mock-gold, baseline or http (overrides the config).
    #[arg(long)]
    backend: Option<String>,
    /// Gazetteer JSON for the baseline backend.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// Reference dataset answered by the mock-gold backend.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Chat-completions base URL, e.g. https://host/v1.
    #[arg(long)]
    base_url: Option<String>,
    /// Model name sent to the endpoint.
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the bearer token.
    #[arg(long)]
    auth_env: Option<String>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Retries after a transient failure.
    #[arg(long)]
    retries: Option<u32>,
}

/// Sampling flags shared by `score` and `eval run`.
#[derive(Debug, Clone, Default, Args)]
pub struct SampleFlags {
    /// Score `reps` random samples of this size and average them.
    #[arg(long)]
    sample: Option<usize>,
    /// Number of repetitions for --sample.
    #[arg(long, default_value_t = 3, requires = "sample")]
    reps: usize,
    /// Seed (overrides the config; default 0).
    #[arg(long)]
    seed: Option<u64>,
}

/// A problem with how the tool was invoked (exit code 1).
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn error_kind(err: &anyhow::Error) -> &'static str {
    if err.downcast_ref::<Usage>().is_some() {
        return "usage";
    }
    for cause in err.chain() {
        if cause.is::<unified_ie::dataset::DatasetError>() {
            return "dataset";
        }
        if cause.is::<unified_ie::CodecError>() {
            return "codec";
        }
        if cause.is::<unified_ie::harness::HarnessError>() {
            return "harness";
        }
        if cause.is::<unified_ie::harness::BackendError>() {
            return "backend";
        }
        if cause.is::<unified_ie::scorer::ScoreError>() {
            return "score";
        }
        if cause.is::<serde_json::Error>() {
            return "json";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "data"
}

fn report(err: &anyhow::Error) -> u8 {
    let kind = error_kind(err);
    let line = serde_json::json!({
        "error": kind,
        "message": format!("{err:#}"),
    });
    eprintln!("{line}");
    if kind == "usage" {
        1
    } else {
        2
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Encode(a) => codec_cmd::encode(&config, a),
        Command::Decode(a) => codec_cmd::decode(&config, a),
        Command::Score(a) => eval_cmd::score(&config, a),
        Command::Eval(EvalCommand::Run(a)) => eval_cmd::run(&config, *a),
        Command::Eval(EvalCommand::Report(a)) => eval_cmd::report(a),
        Command::Dataset(cmd) => match cmd {
            DatasetCommand::Convert(a) => dataset_cmd::convert(&config, a),
            DatasetCommand::Split(a) => dataset_cmd::split(&config, a),
            DatasetCommand::Sample(a) => dataset_cmd::sample(&config, a),
            DatasetCommand::Stats(a) => dataset_cmd::stats(a),
            DatasetCommand::TcreeExtract(a) => dataset_cmd::extract(a),
            DatasetCommand::DraftLabel(a) => dataset_cmd::draft(&config, a),
            DatasetCommand::Gazetteer(a) => dataset_cmd::gazetteer(a),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            let line = serde_json::json!({
                "error": "usage",
                "message": e.kind().to_string(),
            });
            eprintln!("{line}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => ExitCode::from(report(&e)),
    }
}
