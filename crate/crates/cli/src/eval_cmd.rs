use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use unified_ie::harness::{read_run_dir, recompute_report, sampled_evaluation};
use unified_ie::scorer::{render_table, sampled_scores, SampledReport};
use unified_ie::{parse_tolerant, run_eval, score_corpus, score_sequence, EvalConfig, FloatReport};

use crate::config::Config;
use crate::io::{build_backend, load_dataset, read_lines, write_out};
use crate::{BackendArgs, SampleFlags};

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Predicted outputs, one serialized string per gold sample, in order.
    #[arg(long)]
    pred: PathBuf,
    /// Gold dataset (JSONL with header).
    #[arg(long)]
    gold: PathBuf,
    /// Prediction lines are JSON string literals.
    #[arg(long)]
    json: bool,
    /// Also write the report as JSON to this file.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    sampling: SampleFlags,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Dataset to evaluate on.
    #[arg(long)]
    dataset: PathBuf,
    /// Run directory to create.
    #[arg(long)]
    out: PathBuf,
    /// Response cache directory (overrides the config).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Concurrent backend calls.
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    sampling: SampleFlags,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory written by `eval run`.
    #[arg(long)]
    run: PathBuf,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    json: bool,
}

fn render_sampled(r: &SampledReport<f64>) -> String {
    let mut out = format!("mean of {} samples of {} (seed {})\n", r.reps, r.n, r.seed);
    out.push_str(&render_table(&r.mean));
    for (i, rep) in r.per_rep.iter().enumerate() {
        let wl = rep
            .wl_accuracy
            .map_or_else(|| "undefined".to_owned(), |v| format!("{v:.4}"));
        out.push_str(&format!(
            "rep {i}: TL {:.4}  WL {wl}  ALL {:.4}\n",
            rep.tl_accuracy, rep.all_accuracy
        ));
    }
    out
}

fn pretty<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn score(config: &Config, args: ScoreArgs) -> Result<()> {
    let gold = load_dataset(&args.gold)?;
    let mut lines = read_lines(Some(&args.pred))?;
    if lines.last().is_some_and(|l| l.is_empty()) && lines.len() == gold.len() + 1 {
        lines.pop();
    }
    if lines.len() != gold.len() {
        anyhow::bail!(
            "{} has {} predictions but {} has {} samples",
            args.pred.display(),
            lines.len(),
            args.gold.display(),
            gold.len()
        );
    }
    let mut scores = Vec::with_capacity(lines.len());
    for (i, (line, sample)) in lines.iter().zip(&gold.samples).enumerate() {
        let raw = if args.json {
            serde_json::from_str::<String>(line)
                .with_context(|| format!("prediction line {}: not a JSON string", i + 1))?
        } else {
            line.clone()
        };
        scores.push(score_sequence(
            &parse_tolerant(&raw, &gold.task_spec),
            sample,
        ));
    }
    let (table, json) = match args.sampling.sample {
        Some(n) => {
            let seed = config.seed(args.sampling.seed);
            let r = sampled_scores::<f64>(&scores, n, args.sampling.reps, seed)?;
            (render_sampled(&r), pretty(&r)?)
        }
        None => {
            let r: FloatReport = score_corpus(&scores)?;
            (render_table(&r), pretty(&r)?)
        }
    };
    if let Some(path) = &args.report {
        write_out(Some(path), &json)?;
    }
    write_out(None, &table)
}

pub fn run(config: &Config, args: RunArgs) -> Result<()> {
    let dataset = load_dataset(&args.dataset)?;
    let backend = build_backend(config, &args.backend, Some(&dataset), &dataset.task_spec)?;
    let eval = EvalConfig {
        parallelism: args.parallelism,
        cache_dir: config.cache_dir(args.cache.clone()),
        dataset_ref: Some(args.dataset.display().to_string()),
    };
    match args.sampling.sample {
        None => {
            let run = run_eval(&dataset, backend.as_ref(), &eval)?;
            run.write_dir(&args.out)?;
            eprintln!(
                "{} samples, {} backend calls, {} cache hits, {} failures -> {}",
                run.records.len(),
                run.stats.backend_calls,
                run.stats.cache_hits,
                run.stats.failures,
                args.out.display()
            );
            write_out(None, &render_table(&run.report))
        }
        Some(n) => {
            let seed = config.seed(args.sampling.seed);
            let (report, runs) = sampled_evaluation::<f64>(
                &dataset,
                backend.as_ref(),
                n,
                args.sampling.reps,
                seed,
                &eval,
            )?;
            for (i, run) in runs.iter().enumerate() {
                run.write_dir(args.out.join(format!("rep-{i}")))?;
            }
            write_out(Some(&args.out.join("sampled.json")), &pretty(&report)?)?;
            write_out(None, &render_sampled(&report))
        }
    }
}

pub fn report(args: ReportArgs) -> Result<()> {
    let sampled = args.run.join("sampled.json");
    if sampled.is_file() {
        let text = std::fs::read_to_string(&sampled)
            .with_context(|| format!("reading {}", sampled.display()))?;
        let r: SampledReport<f64> = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", sampled.display()))?;
        let body = if args.json {
            pretty(&r)?
        } else {
            render_sampled(&r)
        };
        return write_out(None, &body);
    }
    let run = read_run_dir(&args.run)?;
    let report = recompute_report(&run.records)?;
    if report != run.report {
        eprintln!("note: report.json differs from the records; showing the recomputed report");
    }
    let body = if args.json {
        pretty(&report)?
    } else {
        format!(
            "run {} backend {}{} on {} samples\n{}",
            run.snapshot.run_id,
            run.snapshot.backend,
            run.snapshot
                .model
                .as_deref()
                .map(|m| format!(" ({m})"))
                .unwrap_or_default(),
            run.snapshot.sample_count,
            render_table(&report)
        )
    };
    write_out(None, &body)
}
