//! Text-level (TL), word-level (WL) and exact-sequence (ALL) accuracy.
//!
//! * TL: correctly predicted text labels over the number of sequences.
//! * WL: matched gold units over gold units, micro-averaged over the corpus.
//!   Extra predicted units are not penalised.
//! * ALL: sequences with a correct label and every gold unit recovered, over
//!   the number of sequences. A sequence with no gold units only counts when
//!   the prediction is empty too.
//!
//! Units are compared as multisets of normalized component tuples.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::ParseOutcome;
use crate::model::{normalize, MixedSample, WordPayload};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("cannot score an empty corpus")]
    EmptyCorpus,
    #[error("sample of {n} requested from {len} sequences")]
    SampleTooLarge { n: usize, len: usize },
    #[error("sample size and repetitions must be at least 1")]
    EmptySample,
}

/// Normalized unit tuple -> multiplicity.
pub type UnitMultiset = BTreeMap<Vec<String>, usize>;

pub fn canonical_units(payload: &WordPayload) -> UnitMultiset {
    let mut out = UnitMultiset::new();
    for unit in payload.units() {
        let key: Vec<String> = unit.iter().map(|f| normalize(f)).collect();
        *out.entry(key).or_default() += 1;
    }
    out
}

/// Size of the multiset intersection.
pub fn multiset_overlap(a: &UnitMultiset, b: &UnitMultiset) -> usize {
    a.iter()
        .map(|(k, n)| b.get(k).map_or(0, |m| (*n).min(*m)))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SequenceScore {
    pub tl_correct: bool,
    pub m_match: usize,
    pub t_pair: usize,
    pub p_pair_count: usize,
    pub wl_perfect: bool,
}

impl SequenceScore {
    pub fn exact(&self) -> bool {
        self.tl_correct && self.wl_perfect
    }
}

pub fn score_units(
    pred_label: Option<&str>,
    pred_payload: &WordPayload,
    gold_label: &str,
    gold_payload: &WordPayload,
) -> SequenceScore {
    let pred = canonical_units(pred_payload);
    let gold = canonical_units(gold_payload);
    let m_match = multiset_overlap(&pred, &gold);
    let t_pair = gold_payload.len();
    let p_pair_count = pred_payload.len();
    let tl_correct = pred_label.is_some_and(|l| normalize(l) == normalize(gold_label));
    let wl_perfect = if t_pair == 0 {
        p_pair_count == 0
    } else {
        m_match == t_pair
    };
    SequenceScore {
        tl_correct,
        m_match,
        t_pair,
        p_pair_count,
        wl_perfect,
    }
}

pub fn score_sequence(pred: &ParseOutcome, gold: &MixedSample) -> SequenceScore {
    score_units(
        pred.label.as_deref(),
        &pred.payload,
        &gold.gold_label,
        &gold.gold_payload,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub m_match: u64,
    pub t_pair: u64,
    pub p_pair: u64,
    /// Number of scored sequences.
    pub t_label: u64,
    pub tl_correct: u64,
    pub wl_perfect: u64,
    /// Sequences with a correct label and a perfect word-level result.
    pub exact_count: u64,
}

/// Extras that are not part of the TL/WL/ALL definitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonNormative<S> {
    pub precision: Option<S>,
    pub f1: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport<S> {
    pub tl_accuracy: S,
    /// `None` when the corpus has no gold units at all.
    pub wl_accuracy: Option<S>,
    pub all_accuracy: S,
    /// Mean per-sequence WL over sequences that have gold units.
    pub wl_macro_accuracy: Option<S>,
    pub non_normative: NonNormative<S>,
    pub totals: Totals,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl<S: Scalar> ScoreReport<S> {
    pub fn to_f64(&self) -> ScoreReport<f64> {
        let f = |v: S| v.as_f64();
        ScoreReport {
            tl_accuracy: f(self.tl_accuracy),
            wl_accuracy: self.wl_accuracy.map(f),
            all_accuracy: f(self.all_accuracy),
            wl_macro_accuracy: self.wl_macro_accuracy.map(f),
            non_normative: NonNormative {
                precision: self.non_normative.precision.map(f),
                f1: self.non_normative.f1.map(f),
            },
            totals: self.totals,
            diagnostics: self.diagnostics.clone(),
        }
    }
}

pub fn totals(scores: &[SequenceScore]) -> Totals {
    let mut t = Totals::default();
    for s in scores {
        t.m_match += s.m_match as u64;
        t.t_pair += s.t_pair as u64;
        t.p_pair += s.p_pair_count as u64;
        t.t_label += 1;
        t.tl_correct += u64::from(s.tl_correct);
        t.wl_perfect += u64::from(s.wl_perfect);
        t.exact_count += u64::from(s.exact());
    }
    t
}

pub fn score_corpus<S: Scalar>(scores: &[SequenceScore]) -> Result<ScoreReport<S>, ScoreError> {
    if scores.is_empty() {
        return Err(ScoreError::EmptyCorpus);
    }
    let t = totals(scores);
    let mut diagnostics = Vec::new();
    let wl = if t.t_pair == 0 {
        diagnostics.push("wl_accuracy undefined: corpus has no gold units".to_owned());
        None
    } else {
        Some(S::ratio(t.m_match, t.t_pair))
    };
    let per_seq: Vec<S> = scores
        .iter()
        .filter(|s| s.t_pair > 0)
        .map(|s| S::ratio(s.m_match as u64, s.t_pair as u64))
        .collect();
    let precision = (t.p_pair > 0).then(|| S::ratio(t.m_match, t.p_pair));
    let f1 = match (precision, wl) {
        (Some(p), Some(r)) if p + r > S::zero() => Some((p * r + p * r) / (p + r)),
        (Some(_), Some(_)) => Some(S::zero()),
        _ => None,
    };
    Ok(ScoreReport {
        tl_accuracy: S::ratio(t.tl_correct, t.t_label),
        wl_accuracy: wl,
        all_accuracy: S::ratio(t.exact_count, t.t_label),
        wl_macro_accuracy: S::mean(&per_seq),
        non_normative: NonNormative { precision, f1 },
        totals: t,
        diagnostics,
    })
}

/// Per-metric arithmetic mean of several reports; totals are summed.
///
/// An optional metric is defined in the mean only if every report defines it.
pub fn mean_report<S: Scalar>(reports: &[ScoreReport<S>]) -> Option<ScoreReport<S>> {
    if reports.is_empty() {
        return None;
    }
    let all_some = |get: fn(&ScoreReport<S>) -> Option<S>| -> Option<S> {
        let vals: Option<Vec<S>> = reports.iter().map(get).collect();
        vals.and_then(|v| S::mean(&v))
    };
    let plain = |get: fn(&ScoreReport<S>) -> S| -> S {
        S::mean(&reports.iter().map(get).collect::<Vec<_>>()).expect("non-empty")
    };
    let mut t = Totals::default();
    for r in reports {
        t.m_match += r.totals.m_match;
        t.t_pair += r.totals.t_pair;
        t.p_pair += r.totals.p_pair;
        t.t_label += r.totals.t_label;
        t.tl_correct += r.totals.tl_correct;
        t.wl_perfect += r.totals.wl_perfect;
        t.exact_count += r.totals.exact_count;
    }
    let mut diagnostics: Vec<String> = reports.iter().flat_map(|r| r.diagnostics.clone()).collect();
    diagnostics.dedup();
    Some(ScoreReport {
        tl_accuracy: plain(|r| r.tl_accuracy),
        wl_accuracy: all_some(|r| r.wl_accuracy),
        all_accuracy: plain(|r| r.all_accuracy),
        wl_macro_accuracy: all_some(|r| r.wl_macro_accuracy),
        non_normative: NonNormative {
            precision: all_some(|r| r.non_normative.precision),
            f1: all_some(|r| r.non_normative.f1),
        },
        totals: t,
        diagnostics,
    })
}

/// Indices of repetition `rep`: `n` distinct positions out of `len`, sorted.
///
/// Each repetition draws from its own ChaCha stream of `seed`, so repetitions
/// are independent of each other and reproducible one by one.
pub fn sample_indices(len: usize, n: usize, seed: u64, rep: u64) -> Result<Vec<usize>, ScoreError> {
    if n == 0 {
        return Err(ScoreError::EmptySample);
    }
    if n > len {
        return Err(ScoreError::SampleTooLarge { n, len });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    let mut idx = index::sample(&mut rng, len, n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledReport<S> {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub per_rep: Vec<ScoreReport<S>>,
    pub mean: ScoreReport<S>,
}

impl<S: Scalar> SampledReport<S> {
    pub fn to_f64(&self) -> SampledReport<f64> {
        SampledReport {
            n: self.n,
            reps: self.reps,
            seed: self.seed,
            per_rep: self.per_rep.iter().map(ScoreReport::to_f64).collect(),
            mean: self.mean.to_f64(),
        }
    }
}

/// Runs `evaluate` on `reps` independent samples of size `n` and averages.
pub fn sampled<S, E, F>(
    len: usize,
    n: usize,
    reps: usize,
    seed: u64,
    mut evaluate: F,
) -> Result<SampledReport<S>, E>
where
    S: Scalar,
    E: From<ScoreError>,
    F: FnMut(&[usize]) -> Result<ScoreReport<S>, E>,
{
    if reps == 0 {
        return Err(ScoreError::EmptySample.into());
    }
    let mut per_rep = Vec::with_capacity(reps);
    for rep in 0..reps {
        let idx = sample_indices(len, n, seed, rep as u64)?;
        per_rep.push(evaluate(&idx)?);
    }
    let mean = mean_report(&per_rep).expect("reps >= 1");
    Ok(SampledReport {
        n,
        reps,
        seed,
        per_rep,
        mean,
    })
}

/// Sampled protocol over precomputed per-sequence scores.
pub fn sampled_scores<S: Scalar>(
    scores: &[SequenceScore],
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<SampledReport<S>, ScoreError> {
    sampled(scores.len(), n, reps, seed, |idx| {
        let picked: Vec<SequenceScore> = idx.iter().map(|&i| scores[i]).collect();
        score_corpus(&picked)
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_owned(), |x| format!("{:.4}", x))
}

/// Plain-text table for terminal display.
pub fn render_table<S: Scalar>(report: &ScoreReport<S>) -> String {
    let r = report.to_f64();
    let t = r.totals;
    let mut out = String::new();
    let rows = [
        (
            "TL accuracy",
            cell(Some(r.tl_accuracy)),
            format!("{}/{}", t.tl_correct, t.t_label),
        ),
        (
            "WL accuracy",
            cell(r.wl_accuracy),
            format!("{}/{}", t.m_match, t.t_pair),
        ),
        (
            "ALL accuracy",
            cell(Some(r.all_accuracy)),
            format!("{}/{}", t.exact_count, t.t_label),
        ),
        ("WL macro", cell(r.wl_macro_accuracy), String::new()),
        (
            "precision*",
            cell(r.non_normative.precision),
            format!("{}/{}", t.m_match, t.p_pair),
        ),
        ("F1*", cell(r.non_normative.f1), String::new()),
    ];
    let _ = writeln!(out, "{:<14} {:>10}  counts", "metric", "value");
    for (name, value, counts) in rows {
        let _ = writeln!(out, "{name:<14} {value:>10}  {counts}");
    }
    let _ = writeln!(out, "* non-normative");
    for d in &r.diagnostics {
        let _ = writeln!(out, "note: {d}");
    }
    out
}
