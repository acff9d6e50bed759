use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use unified_ie::model::WordPayload;
use unified_ie::{build_input, encode_output, parse_tolerant, MixedSample, TaskSpec};

use crate::config::{Config, SpecArgs};
use crate::io::{read_lines, write_out};
use crate::Usage;

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// JSONL records: dataset samples or {"label", "payload"} objects.
    /// A dataset header line is accepted and supplies the task spec. Stdin if omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit model inputs (text + label set + instruction word) instead of outputs.
    #[arg(long)]
    inputs: bool,
    /// Write each string as a JSON string literal.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    spec: SpecArgs,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Serialized outputs, one per line. Stdin if omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input lines are JSON string literals.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    spec: SpecArgs,
}

/// What `decode` writes and `encode` reads back.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Decoded {
    label: Option<String>,
    payload: WordPayload,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Record {
    Sample(MixedSample),
    Decoded(Decoded),
}

/// Task spec from a dataset header line, if `line` is one.
fn header_spec(line: &str) -> Option<TaskSpec> {
    let v: Value = serde_json::from_str(line).ok()?;
    v.get("format")?;
    serde_json::from_value(v.get("task_spec")?.clone()).ok()
}

pub fn encode(config: &Config, args: EncodeArgs) -> Result<()> {
    let lines = read_lines(args.input.as_deref())?;
    let header = lines.first().and_then(|l| header_spec(l));
    let spec = args.spec.resolve(config, header.as_ref())?;
    let skip = usize::from(header.is_some());
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate().skip(skip) {
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let record: Record = serde_json::from_str(line)
            .with_context(|| format!("line {n}: not a sample or label/payload record"))?;
        let text = if args.inputs {
            let Record::Sample(s) = &record else {
                return Err(Usage(format!("line {n}: --inputs needs samples with text")).into());
            };
            build_input(&s.text, &spec)
                .with_context(|| format!("line {n}"))?
                .into_string()
        } else {
            let (label, payload) = match &record {
                Record::Sample(s) => (Some(s.gold_label.as_str()), &s.gold_payload),
                Record::Decoded(d) => (d.label.as_deref(), &d.payload),
            };
            let label =
                label.ok_or_else(|| anyhow::anyhow!("line {n}: record has no label to encode"))?;
            encode_output(label, payload, &spec)
                .with_context(|| format!("line {n}"))?
                .into_string()
        };
        if args.json {
            out.push_str(&serde_json::to_string(&text)?);
        } else if text.contains(['\n', '\r']) {
            anyhow::bail!("line {n}: encoded string spans several lines; use --json");
        } else {
            out.push_str(&text);
        }
        out.push('\n');
    }
    write_out(args.out.as_deref(), &out)
}

pub fn decode(config: &Config, args: DecodeArgs) -> Result<()> {
    let spec = args.spec.resolve(config, None)?;
    let lines = read_lines(args.input.as_deref())?;
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        let n = i + 1;
        let raw = if args.json {
            serde_json::from_str::<String>(line)
                .with_context(|| format!("line {n}: not a JSON string"))?
        } else {
            line.clone()
        };
        let parsed = parse_tolerant(&raw, &spec);
        for d in &parsed.diagnostics {
            let mut v = serde_json::to_value(d)?;
            v["line"] = n.into();
            eprintln!("{v}");
        }
        let record = Decoded {
            label: parsed.label,
            payload: parsed.payload,
        };
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    write_out(args.out.as_deref(), &out)
}
