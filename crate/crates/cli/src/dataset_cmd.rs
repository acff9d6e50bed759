use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use unified_ie::codec::input_text;
use unified_ie::dataset::{
    self, draft_label, extract_candidates, load_rules, Candidate, CorpusLayout, RuleKind,
};
use unified_ie::harness::Gazetteer;
use unified_ie::{
    build_input, encode_output, parse_strict, write_jsonl, DatasetFile, MixedSample,
    SerializedInput,
};

use crate::config::{Config, SpecArgs};
use crate::io::{build_backend, load_dataset, read_lines, write_out};
use crate::{BackendArgs, Usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvertTarget {
    /// Canonical dataset to {"id", "input", "output"} training pairs.
    Seq2seq,
    /// Header-less samples or training pairs to a canonical dataset.
    Dataset,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    to: ConvertTarget,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    spec: SpecArgs,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Number of training samples; the rest become the test set.
    #[arg(long)]
    train: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    input: PathBuf,
    /// Sample size.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Layout {
    /// `text/<category>/<file>.txt`, URL and date header lines, license files skipped.
    Livedoor,
    /// Every file is an article body.
    Plain,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Corpus root directory.
    #[arg(long)]
    corpus: PathBuf,
    /// Rule file.
    #[arg(long)]
    rules: PathBuf,
    #[arg(long, value_enum, default_value_t = Layout::Livedoor)]
    layout: Layout,
    /// Candidate JSONL output (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DraftArgs {
    /// Candidate JSONL from `tcree-extract`.
    #[arg(long)]
    candidates: PathBuf,
    /// Only label candidates of this kind (RE or EE).
    #[arg(long)]
    yields: Option<String>,
    /// Draft dataset output.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct GazetteerArgs {
    /// Training dataset.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Seq2Seq {
    id: String,
    input: String,
    output: String,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ConvertRecord {
    Pair(Seq2Seq),
    Sample(MixedSample),
}

pub fn convert(config: &Config, args: ConvertArgs) -> Result<()> {
    match args.to {
        ConvertTarget::Seq2seq => {
            let ds = load_dataset(&args.input)?;
            let spec = if args.spec.given() {
                args.spec.resolve(config, Some(&ds.task_spec))?
            } else {
                ds.task_spec.clone()
            };
            let mut out = String::new();
            for s in &ds.samples {
                let pair = Seq2Seq {
                    id: s.id.clone(),
                    input: build_input(&s.text, &spec)
                        .with_context(|| format!("sample {}", s.id))?
                        .into_string(),
                    output: encode_output(&s.gold_label, &s.gold_payload, &spec)
                        .with_context(|| format!("sample {}", s.id))?
                        .into_string(),
                };
                out.push_str(&serde_json::to_string(&pair)?);
                out.push('\n');
            }
            write_out(args.out.as_deref(), &out)
        }
        ConvertTarget::Dataset => {
            let spec = args.spec.resolve(config, None)?;
            let mut samples = Vec::new();
            for (i, line) in read_lines(Some(&args.input))?.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let n = i + 1;
                let record: ConvertRecord = serde_json::from_str(line)
                    .with_context(|| format!("line {n}: not a sample or training pair"))?;
                samples.push(match record {
                    ConvertRecord::Sample(s) => s,
                    ConvertRecord::Pair(p) => {
                        let input = SerializedInput::new_unchecked(p.input);
                        let text = input_text(&input, &spec).ok_or_else(|| {
                            anyhow::anyhow!("line {n}: input does not end with the task's label set and instruction word")
                        })?;
                        let parsed =
                            parse_strict(&p.output, &spec).with_context(|| format!("line {n}"))?;
                        MixedSample::new(
                            p.id,
                            text,
                            parsed.label.unwrap_or_default(),
                            parsed.payload,
                        )
                    }
                });
            }
            let ds = DatasetFile::new(spec, samples);
            ds.validate()?;
            match &args.out {
                Some(p) => write_jsonl(&ds, p).map_err(Into::into),
                None => write_out(None, &ds.to_jsonl()),
            }
        }
    }
}

pub fn split(config: &Config, args: SplitArgs) -> Result<()> {
    let ds = load_dataset(&args.input)?;
    let (train, test) = dataset::split(&ds, args.train, config.seed(args.seed))?;
    write_jsonl(&train, &args.train_out)?;
    write_jsonl(&test, &args.test_out)?;
    println!("train {} test {}", train.len(), test.len());
    Ok(())
}

pub fn sample(config: &Config, args: SampleArgs) -> Result<()> {
    let ds = load_dataset(&args.input)?;
    let picked = dataset::sample(&ds, args.n, config.seed(args.seed))?;
    write_jsonl(&picked, &args.out)?;
    println!("sampled {} of {}", picked.len(), ds.len());
    Ok(())
}

pub fn stats(args: StatsArgs) -> Result<()> {
    let ds = load_dataset(&args.input)?;
    let s = dataset::stats(&ds);
    let body = if args.json {
        let mut j = serde_json::to_string_pretty(&s)?;
        j.push('\n');
        j
    } else {
        s.render()
    };
    write_out(None, &body)
}

pub fn extract(args: ExtractArgs) -> Result<()> {
    let rules = load_rules(&args.rules)?;
    let layout = match args.layout {
        Layout::Livedoor => CorpusLayout::livedoor(),
        Layout::Plain => CorpusLayout::default(),
    };
    let ex = extract_candidates(&args.corpus, &rules, &layout)?;
    for d in &ex.diagnostics {
        eprintln!("{}", serde_json::json!({ "warning": d }));
    }
    let mut out = String::new();
    for c in &ex.candidates {
        out.push_str(&serde_json::to_string(c)?);
        out.push('\n');
    }
    write_out(args.out.as_deref(), &out)?;
    eprintln!(
        "{} articles, {} sentences, {} candidates",
        ex.articles,
        ex.sentences,
        ex.candidates.len()
    );
    Ok(())
}

pub fn draft(config: &Config, args: DraftArgs) -> Result<()> {
    let spec = args.spec.resolve(config, None)?;
    let yields = match args.yields.as_deref() {
        None => None,
        Some("RE") => Some(RuleKind::Re),
        Some("EE") => Some(RuleKind::Ee),
        Some(other) => {
            return Err(Usage(format!("--yields must be RE or EE, not {other:?}")).into())
        }
    };
    let mut candidates = Vec::new();
    for (i, line) in read_lines(Some(&args.candidates))?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let c: Candidate =
            serde_json::from_str(line).with_context(|| format!("candidate line {}", i + 1))?;
        if yields.is_none_or(|y| y == c.yields) {
            candidates.push(c);
        }
    }
    let backend = build_backend(config, &args.backend, None, &spec)?;
    let outcome = draft_label(&candidates, backend.as_ref(), &spec);
    for e in &outcome.errors {
        eprintln!("{}", serde_json::to_string(e)?);
    }
    write_jsonl(&outcome.dataset, &args.out)?;
    eprintln!(
        "{} drafts, {} errors -> {}",
        outcome.dataset.len(),
        outcome.errors.len(),
        args.out.display()
    );
    Ok(())
}

pub fn gazetteer(args: GazetteerArgs) -> Result<()> {
    let ds = load_dataset(&args.input)?;
    let g = Gazetteer::from_dataset(&ds);
    let mut body = serde_json::to_string_pretty(&g)?;
    body.push('\n');
    write_out(Some(&args.out), &body)
}
