//! Evaluation runs.
//!
//! For each sample: build the input, look it up in the cache, call the
//! backend on a miss, parse the reply tolerantly and score it against gold.
//! Samples are processed by a bounded pool of worker threads; the records
//! and the report are assembled in dataset order, so the result does not
//! depend on the degree of parallelism.
//!
//! A run directory holds `records.jsonl`, `report.json`, `config.json`
//! and `stats.json`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{build_input, parse_tolerant, ParseOutcome, SerializedInput};
use crate::dataset::DatasetFile;
use crate::model::TaskSpec;
use crate::scalar::Scalar;
use crate::scorer::{
    sampled, score_corpus, score_sequence, SampledReport, ScoreReport, SequenceScore,
};
use crate::FloatReport;

use super::{Backend, CacheEntry, HarnessError, ResponseCache};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub parallelism: usize,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Free-form dataset reference recorded in the snapshot.
    #[serde(default)]
    pub dataset_ref: Option<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            parallelism: 1,
            cache_dir: None,
            dataset_ref: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub input: String,
    /// `None` when the backend call failed.
    pub raw_output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub parse: ParseOutcome,
    pub score: SequenceScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub run_id: String,
    pub backend: String,
    pub model: Option<String>,
    pub deterministic: bool,
    pub dataset: Option<String>,
    pub task_spec: TaskSpec,
    pub sample_count: usize,
    pub parallelism: usize,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub backend_calls: usize,
    pub cache_hits: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub snapshot: RunSnapshot,
    pub records: Vec<SampleRecord>,
    pub report: FloatReport,
    pub stats: RunStats,
}

type Slot = Mutex<Option<Result<(SampleRecord, Source), HarnessError>>>;

enum Source {
    Cache,
    Backend,
    Failed,
}

fn run_id(backend: &dyn Backend, inputs: &[SerializedInput]) -> String {
    let mut h = Sha256::new();
    h.update(backend.name().as_bytes());
    h.update([0]);
    h.update(backend.model().unwrap_or("").as_bytes());
    for i in inputs {
        h.update([0]);
        h.update(i.as_str().as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

pub fn run_eval(
    dataset: &DatasetFile,
    backend: &dyn Backend,
    config: &EvalConfig,
) -> Result<EvalRun, HarnessError> {
    if config.parallelism == 0 {
        return Err(HarnessError::ZeroParallelism);
    }
    let spec = &dataset.task_spec;
    let inputs = dataset
        .samples
        .iter()
        .map(|s| {
            build_input(&s.text, spec).map_err(|e| HarnessError::InvalidSample {
                id: s.id.clone(),
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cache = config.cache_dir.as_ref().map(ResponseCache::new);

    let n = inputs.len();
    let slots: Vec<Slot> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.parallelism.min(n.max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = evaluate_one(dataset, i, &inputs[i], backend, cache.as_ref());
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });

    let mut records = Vec::with_capacity(n);
    let mut stats = RunStats::default();
    for slot in slots {
        let (record, source) = slot
            .into_inner()
            .expect("slot lock")
            .expect("every slot is filled")?;
        match source {
            Source::Cache => stats.cache_hits += 1,
            Source::Backend => stats.backend_calls += 1,
            Source::Failed => {
                stats.backend_calls += 1;
                stats.failures += 1;
            }
        }
        records.push(record);
    }
    let report = recompute_report(&records)?;
    let snapshot = RunSnapshot {
        run_id: run_id(backend, &inputs),
        backend: backend.name().to_owned(),
        model: backend.model().map(str::to_owned),
        deterministic: backend.deterministic(),
        dataset: config.dataset_ref.clone(),
        task_spec: spec.clone(),
        sample_count: n,
        parallelism: config.parallelism,
        cache_dir: config.cache_dir.clone(),
    };
    Ok(EvalRun {
        snapshot,
        records,
        report,
        stats,
    })
}

fn evaluate_one(
    dataset: &DatasetFile,
    index: usize,
    input: &SerializedInput,
    backend: &dyn Backend,
    cache: Option<&ResponseCache>,
) -> Result<(SampleRecord, Source), HarnessError> {
    let sample = &dataset.samples[index];
    let spec = &dataset.task_spec;
    let cached = match cache {
        Some(c) => c.get(backend.name(), backend.model(), input.as_str())?,
        None => None,
    };
    let (raw, error, source) = match cached {
        Some(out) => (Some(out), None, Source::Cache),
        None => match backend.complete(input) {
            Ok(out) => {
                if let Some(c) = cache {
                    c.put(&CacheEntry {
                        backend: backend.name().to_owned(),
                        model: backend.model().map(str::to_owned),
                        input: input.as_str().to_owned(),
                        output: out.clone(),
                    })?;
                }
                (Some(out), None, Source::Backend)
            }
            Err(e) => (None, Some(e.to_string()), Source::Failed),
        },
    };
    let parse = match &raw {
        Some(r) => parse_tolerant(r, spec),
        None => ParseOutcome::empty(spec.word_task.payload_kind()),
    };
    let score = score_sequence(&parse, sample);
    Ok((
        SampleRecord {
            id: sample.id.clone(),
            input: input.as_str().to_owned(),
            raw_output: raw,
            error,
            parse,
            score,
        },
        source,
    ))
}

pub fn recompute_report(records: &[SampleRecord]) -> Result<FloatReport, HarnessError> {
    recompute_report_as(records)
}

fn recompute_report_as<S: Scalar>(
    records: &[SampleRecord],
) -> Result<ScoreReport<S>, HarnessError> {
    let scores: Vec<SequenceScore> = records.iter().map(|r| r.score).collect();
    Ok(score_corpus(&scores)?)
}

impl EvalRun {
    /// The report in another scalar type, recomputed from the records.
    pub fn report_as<S: Scalar>(&self) -> Result<ScoreReport<S>, HarnessError> {
        recompute_report_as(&self.records)
    }

    pub fn report_json(&self) -> String {
        pretty(&self.report)
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), HarnessError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)
            .map_err(|e| HarnessError::io(format!("creating {}", dir.display()), e))?;
        let mut records = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut records, r).expect("record serializes");
            records.push(b'\n');
        }
        let write = |name: &str, bytes: &[u8]| {
            let path = dir.join(name);
            fs::File::create(&path)
                .and_then(|mut f| f.write_all(bytes))
                .map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))
        };
        write("records.jsonl", &records)?;
        write("report.json", self.report_json().as_bytes())?;
        write("config.json", pretty(&self.snapshot).as_bytes())?;
        write("stats.json", pretty(&self.stats).as_bytes())
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializes");
    s.push('\n');
    s
}

/// Loads a run directory written by [`EvalRun::write_dir`].
pub fn read_run_dir(dir: impl AsRef<Path>) -> Result<EvalRun, HarnessError> {
    let dir = dir.as_ref();
    let bad = |path: &Path, message: String| HarnessError::BadArtifact {
        path: path.display().to_string(),
        message,
    };
    let read_json = |name: &str| -> Result<serde_json::Value, HarnessError> {
        let path = dir.join(name);
        let text = fs::read_to_string(&path)
            .map_err(|e| HarnessError::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| bad(&path, e.to_string()))
    };
    let snapshot: RunSnapshot = serde_json::from_value(read_json("config.json")?)
        .map_err(|e| bad(&dir.join("config.json"), e.to_string()))?;
    let report: FloatReport = serde_json::from_value(read_json("report.json")?)
        .map_err(|e| bad(&dir.join("report.json"), e.to_string()))?;
    let stats: RunStats = match read_json("stats.json") {
        Ok(v) => {
            serde_json::from_value(v).map_err(|e| bad(&dir.join("stats.json"), e.to_string()))?
        }
        Err(HarnessError::Io { .. }) => RunStats::default(),
        Err(e) => return Err(e),
    };
    let path = dir.join("records.jsonl");
    let file = fs::File::open(&path)
        .map_err(|e| HarnessError::io(format!("reading {}", path.display()), e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line).map_err(|e| bad(&path, format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(EvalRun {
        snapshot,
        records,
        report,
        stats,
    })
}

/// Repeated-sampling evaluation: `reps` independent samples of `n` items,
/// each evaluated as its own run, metrics averaged across repetitions.
pub fn sampled_evaluation<S: Scalar>(
    dataset: &DatasetFile,
    backend: &dyn Backend,
    n: usize,
    reps: usize,
    seed: u64,
    config: &EvalConfig,
) -> Result<(SampledReport<S>, Vec<EvalRun>), HarnessError> {
    let mut runs = Vec::with_capacity(reps);
    let report = sampled(dataset.samples.len(), n, reps, seed, |idx| {
        let subset = dataset.subset(idx);
        let run = run_eval(&subset, backend, config)?;
        let report = run.report_as::<S>()?;
        runs.push(run);
        Ok::<_, HarnessError>(report)
    })?;
    Ok((report, runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{BackendError, FnBackend, MockGoldBackend};
    use crate::model::{LabelSpanPair, MixedSample, TextTask, WordPayload, WordTask};

    fn fixture() -> DatasetFile {
        let spec = TaskSpec::new(TextTask::Tc(vec!["a".into(), "b".into()]), WordTask::Ner);
        let samples = (0..12)
            .map(|i| {
                MixedSample::new(
                    format!("s{i}"),
                    format!("text number {i}"),
                    if i % 3 == 0 { "a" } else { "b" },
                    WordPayload::Pairs(
                        (0..i % 4)
                            .map(|k| LabelSpanPair::new("NUM", format!("{}", i + k)))
                            .collect(),
                    ),
                )
            })
            .collect();
        DatasetFile::new(spec, samples)
    }

    #[test]
    fn gold_mock_is_perfect() {
        let ds = fixture();
        let mock = MockGoldBackend::new(&ds).unwrap();
        let run = run_eval(&ds, &mock, &EvalConfig::default()).unwrap();
        assert_eq!(run.report.tl_accuracy, 1.0);
        assert_eq!(run.report.wl_accuracy, Some(1.0));
        assert_eq!(run.report.all_accuracy, 1.0);
        assert_eq!(run.stats.backend_calls, 12);
        assert_eq!(recompute_report(&run.records).unwrap(), run.report);
    }

    #[test]
    fn failures_degrade_to_empty_predictions() {
        let ds = fixture();
        let mock = MockGoldBackend::new(&ds).unwrap();
        let flaky = FnBackend::new("flaky", true, |input: &SerializedInput| {
            if input.as_str().starts_with("text number 1<") {
                Err(BackendError::Timeout)
            } else {
                mock.complete(input)
            }
        });
        let run = run_eval(&ds, &flaky, &EvalConfig::default()).unwrap();
        assert_eq!(run.stats.failures, 1);
        let rec = &run.records[1];
        assert_eq!(rec.raw_output, None);
        assert_eq!(rec.error.as_deref(), Some("request timed out"));
        assert!(!rec.score.tl_correct);
        assert_eq!(run.report.totals.exact_count, 11);
    }

    #[test]
    fn zero_parallelism_rejected() {
        let ds = fixture();
        let mock = MockGoldBackend::new(&ds).unwrap();
        let cfg = EvalConfig {
            parallelism: 0,
            ..EvalConfig::default()
        };
        assert!(matches!(
            run_eval(&ds, &mock, &cfg),
            Err(HarnessError::ZeroParallelism)
        ));
    }

    #[test]
    fn run_dir_round_trip() {
        let ds = fixture();
        let mock = MockGoldBackend::new(&ds).unwrap();
        let run = run_eval(&ds, &mock, &EvalConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        run.write_dir(dir.path()).unwrap();
        let back = read_run_dir(dir.path()).unwrap();
        assert_eq!(back, run);
        assert_eq!(recompute_report(&back.records).unwrap(), back.report);
    }
}
