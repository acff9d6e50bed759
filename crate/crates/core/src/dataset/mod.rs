//! Mixed-dataset storage and manipulation.
//!
//! # JSONL layout
//!
//! The first line is a header, every following non-blank line one sample:
//!
//! ```text
//! {"format":"uie-dataset/1","task_spec":{"text_task":{"kind":"TC","labels":["sport","IT"]},"word_task":"RE","instruction_word":"Relation Extraction","max_units":1}}
//! {"id":"a1","text":"...","gold_label":"sport","gold_payload":{"triples":[{"object":"...","relation":"...","subject":"..."}]}}
//! ```
//!
//! Sample fields:
//!
//! | field          | type   | notes                                                    |
//! |----------------|--------|----------------------------------------------------------|
//! | `id`           | string | unique within the file                                   |
//! | `text`         | string | source text                                              |
//! | `gold_label`   | string | member of the header's label set                         |
//! | `gold_payload` | object | exactly one of `pairs` / `triples` / `quads`             |
//! | `draft`        | bool   | optional; machine-labelled, not yet reviewed             |
//! | `notes`        | array  | optional; free-form strings (parser diagnostics, ...)    |
//!
//! `pairs` items are `{"label","span"}`, `triples` items
//! `{"object","relation","subject"}`, `quads` items four-string arrays.
//! Unknown fields are rejected. Draft samples skip label/payload validation
//! so they can carry incomplete machine output into review.

mod draft;
mod extract;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_sample, MixedSample, TaskSpec, WordPayload};
use crate::scorer::{sample_indices, ScoreError};

pub use draft::{draft_label, DraftError, DraftOutcome};
pub use extract::{
    extract_candidates, load_rules, parse_rules, read_corpus, segment_sentences, Article,
    Candidate, CorpusLayout, Extraction, ExtractionRule, RuleKind,
};

pub const FORMAT_TAG: &str = "uie-dataset/1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: invalid JSON: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    SchemaMismatch { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("missing header line")]
    MissingHeader,
    #[error("cannot take {requested} of {available} samples")]
    TooFewSamples { requested: usize, available: usize },
    #[error("no extraction rules given")]
    NoRules,
    #[error("rule file line {line}: {message}")]
    BadRule { line: usize, message: String },
    #[error(transparent)]
    Sampling(#[from] ScoreError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        DatasetError::Io {
            context: context.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    task_spec: TaskSpec,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetFile {
    pub task_spec: TaskSpec,
    pub samples: Vec<MixedSample>,
}

impl DatasetFile {
    pub fn new(task_spec: TaskSpec, samples: Vec<MixedSample>) -> Self {
        Self { task_spec, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// New dataset with the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            task_spec: self.task_spec.clone(),
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    /// Checks every sample and id uniqueness. Line numbers are 1-based with
    /// the header on line 1.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let header_violations = self.task_spec.violations();
        if let Some(v) = header_violations.first() {
            return Err(DatasetError::SchemaMismatch {
                line: 1,
                message: format!("task spec: {v}"),
            });
        }
        let mut seen = HashSet::new();
        for (i, s) in self.samples.iter().enumerate() {
            let line = i + 2;
            if !seen.insert(s.id.as_str()) {
                return Err(DatasetError::DuplicateId {
                    line,
                    id: s.id.clone(),
                });
            }
            check_sample(s, &self.task_spec, line)?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            format: FORMAT_TAG.into(),
            task_spec: self.task_spec.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("sample serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, DatasetError> {
        let mut header: Option<Header> = None;
        let mut samples = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| DatasetError::io(format!("line {line_no}"), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
            match &header {
                None => {
                    let h: Header = serde_json::from_value(value).map_err(|e| {
                        DatasetError::SchemaMismatch {
                            line: line_no,
                            message: format!("header: {e}"),
                        }
                    })?;
                    if h.format != FORMAT_TAG {
                        return Err(DatasetError::SchemaMismatch {
                            line: line_no,
                            message: format!("unsupported format {:?}", h.format),
                        });
                    }
                    if let Some(v) = h.task_spec.violations().first() {
                        return Err(DatasetError::SchemaMismatch {
                            line: line_no,
                            message: format!("task spec: {v}"),
                        });
                    }
                    header = Some(h);
                }
                Some(h) => {
                    let s: MixedSample = serde_json::from_value(value).map_err(|e| {
                        DatasetError::SchemaMismatch {
                            line: line_no,
                            message: e.to_string(),
                        }
                    })?;
                    if !seen.insert(s.id.clone()) {
                        return Err(DatasetError::DuplicateId {
                            line: line_no,
                            id: s.id,
                        });
                    }
                    check_sample(&s, &h.task_spec, line_no)?;
                    samples.push(s);
                }
            }
        }
        let header = header.ok_or(DatasetError::MissingHeader)?;
        Ok(Self {
            task_spec: header.task_spec,
            samples,
        })
    }

    pub fn from_jsonl_str(s: &str) -> Result<Self, DatasetError> {
        Self::from_reader(s.as_bytes())
    }
}

/// Draft samples are exempt from validation.
fn check_sample(s: &MixedSample, spec: &TaskSpec, line: usize) -> Result<(), DatasetError> {
    if s.draft {
        return Ok(());
    }
    let v = validate_sample(s, spec);
    if v.is_empty() {
        return Ok(());
    }
    let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
    Err(DatasetError::SchemaMismatch {
        line,
        message: format!("sample {:?}: {}", s.id, msgs.join("; ")),
    })
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<DatasetFile, DatasetError> {
    let path = path.as_ref();
    let f = fs::File::open(path)
        .map_err(|e| DatasetError::io(format!("opening {}", path.display()), e))?;
    DatasetFile::from_reader(f)
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_jsonl(ds: &DatasetFile, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(ds.to_jsonl().as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        DatasetError::io(format!("writing {}", path.display()), e)
    })
}

/// Uniform random partition into `train_n` training and the remaining test samples.
/// Both parts keep the original sample order.
pub fn split(
    ds: &DatasetFile,
    train_n: usize,
    seed: u64,
) -> Result<(DatasetFile, DatasetFile), DatasetError> {
    let len = ds.samples.len();
    if train_n == 0 || train_n >= len {
        return Err(DatasetError::TooFewSamples {
            requested: train_n,
            available: len,
        });
    }
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train: Vec<usize> = order[..train_n].to_vec();
    let mut test: Vec<usize> = order[train_n..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// `n` samples drawn without replacement, in original order.
pub fn sample(ds: &DatasetFile, n: usize, seed: u64) -> Result<DatasetFile, DatasetError> {
    let idx = sample_indices(ds.samples.len(), n, seed, 0)?;
    Ok(ds.subset(&idx))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub samples: usize,
    pub text_labels: BTreeMap<String, usize>,
    pub word_labels: BTreeMap<String, usize>,
    pub units: usize,
    pub mean_units: f64,
}

/// Which event field is counted as the event label in [`stats`].
pub const EE_LABEL_FIELD: usize = 1;

fn word_labels(payload: &WordPayload) -> Vec<&str> {
    match payload {
        WordPayload::Quads(v) => v.iter().map(|q| q[EE_LABEL_FIELD].as_str()).collect(),
        other => other.unit_labels(),
    }
}

pub fn stats(ds: &DatasetFile) -> StatsReport {
    let mut r = StatsReport {
        samples: ds.samples.len(),
        ..StatsReport::default()
    };
    for s in &ds.samples {
        *r.text_labels.entry(s.gold_label.clone()).or_default() += 1;
        for l in word_labels(&s.gold_payload) {
            *r.word_labels.entry(l.to_owned()).or_default() += 1;
        }
        r.units += s.gold_payload.len();
    }
    if r.samples > 0 {
        r.mean_units = r.units as f64 / r.samples as f64;
    }
    r
}

impl StatsReport {
    pub fn render(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "samples      {}", self.samples);
        let _ = writeln!(out, "units        {}", self.units);
        let _ = writeln!(out, "mean units   {:.3}", self.mean_units);
        let _ = writeln!(out, "text labels  ({})", self.text_labels.len());
        for (k, v) in &self.text_labels {
            let _ = writeln!(out, "  {k:<20} {v}");
        }
        let _ = writeln!(out, "word labels  ({})", self.word_labels.len());
        for (k, v) in &self.word_labels {
            let _ = writeln!(out, "  {k:<20} {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LabelSpanPair, TextTask, Triple, WordTask};

    fn ner_ds(n: usize) -> DatasetFile {
        let spec = TaskSpec::new(
            TextTask::Tc(vec!["x".into(), "y".into(), "z".into()]),
            WordTask::Ner,
        );
        let samples = (0..n)
            .map(|i| {
                MixedSample::new(
                    format!("id{i}"),
                    format!("sentence {i}"),
                    ["x", "y", "z"][i % 3],
                    WordPayload::Pairs(
                        (0..i % 3)
                            .map(|k| LabelSpanPair::new(["PER", "LOC"][k % 2], format!("e{i}")))
                            .collect(),
                    ),
                )
            })
            .collect();
        DatasetFile::new(spec, samples)
    }

    #[test]
    fn jsonl_round_trip_is_byte_stable() {
        let ds = ner_ds(3);
        let text = ds.to_jsonl();
        let back = DatasetFile::from_jsonl_str(&text).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_jsonl(), text);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        write_jsonl(&ds, &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), text);
        assert_eq!(read_jsonl(&p).unwrap(), ds);
    }

    #[test]
    fn missing_field_is_schema_mismatch() {
        let mut text = ner_ds(2).to_jsonl();
        text.push_str(r#"{"id":"q","text":"t","gold_payload":{"pairs":[]}}"#);
        text.push('\n');
        match DatasetFile::from_jsonl_str(&text) {
            Err(DatasetError::SchemaMismatch { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("gold_label"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let mut text = ner_ds(2).to_jsonl();
        text.push_str(r#"{"id":"id0","text":"t","gold_label":"x","gold_payload":{"pairs":[]}}"#);
        assert!(matches!(
            DatasetFile::from_jsonl_str(&text),
            Err(DatasetError::DuplicateId { line: 4, .. })
        ));
        let text = format!("{}{{oops\n", ner_ds(1).to_jsonl());
        assert!(matches!(
            DatasetFile::from_jsonl_str(&text),
            Err(DatasetError::Parse { line: 3, .. })
        ));
        let text = format!(
            "{}{}\n",
            ner_ds(0).to_jsonl(),
            r#"{"id":"a","text":"t","gold_label":"nope","gold_payload":{"pairs":[]}}"#
        );
        assert!(matches!(
            DatasetFile::from_jsonl_str(&text),
            Err(DatasetError::SchemaMismatch { line: 2, .. })
        ));
        assert!(matches!(
            DatasetFile::from_jsonl_str(""),
            Err(DatasetError::MissingHeader)
        ));
    }

    #[test]
    fn single_unit_limit_is_enforced() {
        let spec = TaskSpec::new(TextTask::Tc(vec!["IT".into()]), WordTask::Re).with_max_units(1);
        let two =
            WordPayload::Triples(vec![Triple::new("a", "b", "c"), Triple::new("d", "e", "f")]);
        let ds = DatasetFile::new(spec, vec![MixedSample::new("1", "t", "IT", two)]);
        assert!(matches!(
            DatasetFile::from_jsonl_str(&ds.to_jsonl()),
            Err(DatasetError::SchemaMismatch { line: 2, .. })
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = ner_ds(50);
        let (a, b) = split(&ds, 20, 7).unwrap();
        assert_eq!((a.len(), b.len()), (20, 30));
        let (a2, _) = split(&ds, 20, 7).unwrap();
        assert_eq!(a, a2);
        let ids: HashSet<_> = a.samples.iter().map(|s| &s.id).collect();
        assert!(b.samples.iter().all(|s| !ids.contains(&s.id)));
        assert!(matches!(
            split(&ds, 0, 1),
            Err(DatasetError::TooFewSamples { .. })
        ));
        assert!(matches!(
            split(&ds, 50, 1),
            Err(DatasetError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn stats_counts() {
        let r = stats(&ner_ds(6));
        assert_eq!(r.samples, 6);
        assert_eq!(r.text_labels.len(), 3);
        assert_eq!(r.units, 6);
        assert_eq!(r.word_labels["PER"], 4);
        assert_eq!(r.word_labels["LOC"], 2);
        let empty = stats(&ner_ds(0));
        assert_eq!(empty.samples, 0);
        assert_eq!(empty.mean_units, 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn split_partitions_and_histograms_add_up(len in 2usize..80, frac in 0.0f64..1.0, seed in any::<u64>()) {
                let ds = ner_ds(len);
                let train_n = 1 + ((len - 2) as f64 * frac) as usize;
                let (train, test) = split(&ds, train_n, seed).unwrap();
                prop_assert_eq!(train.len(), train_n);
                prop_assert_eq!(test.len(), len - train_n);
                let (full, a, b) = (stats(&ds), stats(&train), stats(&test));
                let mut merged = a.text_labels.clone();
                for (k, v) in b.text_labels { *merged.entry(k).or_default() += v; }
                prop_assert_eq!(merged, full.text_labels);
                let mut merged = a.word_labels.clone();
                for (k, v) in b.word_labels { *merged.entry(k).or_default() += v; }
                prop_assert_eq!(merged, full.word_labels);
                prop_assert_eq!(a.units + b.units, full.units);
            }
        }
    }
}
