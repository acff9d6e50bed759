//! Data model shared by the codec, scorer, dataset pipeline and harness.
//!
//! A mixed sample pairs one text-level decision (topic or sentiment label)
//! with one word-level extraction payload. Everything here is a plain value:
//! cheap to clone, `Send + Sync`, and free of interior mutability.

use std::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::iw::IwRegistry;

/// Characters that carry grammatical meaning in serialized sequences.
pub const RESERVED: [char; 4] = ['<', '>', ':', ';'];

/// Escape character used inside serialized component strings.
pub const ESCAPE: char = '\\';

pub fn is_reserved(c: char) -> bool {
    RESERVED.contains(&c)
}

fn contains_reserved(s: &str) -> bool {
    s.chars().any(is_reserved)
}

/// Which normalization steps [`normalize_text`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationPolicy {
    pub nfkc: bool,
    pub trim: bool,
    pub collapse_whitespace: bool,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        Self {
            nfkc: true,
            trim: true,
            collapse_whitespace: true,
        }
    }
}

impl NormalizationPolicy {
    pub const NONE: Self = Self {
        nfkc: false,
        trim: false,
        collapse_whitespace: false,
    };
}

/// NFKC, then trim, then collapse internal whitespace runs to one ASCII space.
///
/// NFKC folds the full-width marks `＜＞：；` onto their ASCII forms, so
/// Japanese text cannot smuggle look-alike delimiters past the grammar.
pub fn normalize_text(s: &str, policy: NormalizationPolicy) -> String {
    let mut out: String = if policy.nfkc {
        s.nfkc().collect()
    } else {
        s.to_owned()
    };
    if policy.trim {
        let trimmed = out.trim();
        if trimmed.len() != out.len() {
            out = trimmed.to_owned();
        }
    }
    if policy.collapse_whitespace {
        let mut collapsed = String::with_capacity(out.len());
        let mut in_ws = false;
        for c in out.chars() {
            if c.is_whitespace() {
                if !in_ws {
                    collapsed.push(' ');
                }
                in_ws = true;
            } else {
                collapsed.push(c);
                in_ws = false;
            }
        }
        out = collapsed;
    }
    out
}

/// Shorthand for [`normalize_text`] with every step enabled.
pub fn normalize(s: &str) -> String {
    normalize_text(s, NormalizationPolicy::default())
}

/// Word-level task of a mixed dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WordTask {
    #[serde(rename = "NER")]
    Ner,
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "EE")]
    Ee,
    #[serde(rename = "SENT_RW")]
    SentRw,
    #[serde(rename = "SENT_N")]
    SentN,
    #[serde(rename = "SENT_ADJ")]
    SentAdj,
    #[serde(rename = "SENT_N_ADJ")]
    SentNAdj,
}

impl WordTask {
    pub const ALL: [WordTask; 7] = [
        WordTask::Ner,
        WordTask::Re,
        WordTask::Ee,
        WordTask::SentRw,
        WordTask::SentN,
        WordTask::SentAdj,
        WordTask::SentNAdj,
    ];

    pub fn key(self) -> &'static str {
        match self {
            WordTask::Ner => "NER",
            WordTask::Re => "RE",
            WordTask::Ee => "EE",
            WordTask::SentRw => "SENT_RW",
            WordTask::SentN => "SENT_N",
            WordTask::SentAdj => "SENT_ADJ",
            WordTask::SentNAdj => "SENT_N_ADJ",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.key().eq_ignore_ascii_case(key))
    }

    /// The payload variant this task produces.
    pub fn payload_kind(self) -> PayloadKind {
        match self {
            WordTask::Re => PayloadKind::Triples,
            WordTask::Ee => PayloadKind::Quads,
            _ => PayloadKind::Pairs,
        }
    }

    pub fn is_sentiment(self) -> bool {
        matches!(
            self,
            WordTask::SentRw | WordTask::SentN | WordTask::SentAdj | WordTask::SentNAdj
        )
    }
}

impl fmt::Display for WordTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Text-level task with its ordered candidate label set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "labels")]
pub enum TextTask {
    /// Topic / sentence classification.
    #[serde(rename = "TC")]
    Tc(Vec<String>),
    /// Sentiment polarity classification.
    #[serde(rename = "SC")]
    Sc(Vec<String>),
}

impl TextTask {
    pub fn labels(&self) -> &[String] {
        match self {
            TextTask::Tc(l) | TextTask::Sc(l) => l,
        }
    }

    /// Default polarity set for sentiment datasets.
    pub fn default_polarity() -> Self {
        TextTask::Sc(vec!["positive".into(), "negative".into()])
    }
}

/// Task definition a dataset or a single sample is bound to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub text_task: TextTask,
    pub word_task: WordTask,
    pub instruction_word: String,
    /// Upper bound on word-level units per sample (1 for relation/event
    /// topic datasets, where a sentence carries at most one triple or event).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_units: Option<usize>,
}

impl TaskSpec {
    /// Builds a spec whose instruction word comes from the built-in English registry.
    pub fn new(text_task: TextTask, word_task: WordTask) -> Self {
        let instruction_word = IwRegistry::english().get(word_task).to_owned();
        Self {
            text_task,
            word_task,
            instruction_word,
            max_units: None,
        }
    }

    pub fn with_registry(text_task: TextTask, word_task: WordTask, registry: &IwRegistry) -> Self {
        Self {
            instruction_word: registry.get(word_task).to_owned(),
            ..Self::new(text_task, word_task)
        }
    }

    pub fn with_instruction_word(mut self, iw: impl Into<String>) -> Self {
        self.instruction_word = iw.into();
        self
    }

    pub fn with_max_units(mut self, n: usize) -> Self {
        self.max_units = Some(n);
        self
    }

    pub fn labels(&self) -> &[String] {
        self.text_task.labels()
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels().iter().any(|l| l == label)
    }

    /// Checks the spec's own invariants; empty means valid.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let labels = self.labels();
        if labels.is_empty() {
            out.push(Violation::EmptyLabelSet);
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || contains_reserved(l) || l.contains(ESCAPE) {
                out.push(Violation::BadSpecLabel(l.clone()));
            }
            if labels[..i].contains(l) {
                out.push(Violation::DuplicateSpecLabel(l.clone()));
            }
        }
        let iw = &self.instruction_word;
        if iw.is_empty() || contains_reserved(iw) || iw.contains(ESCAPE) {
            out.push(Violation::BadInstructionWord(iw.clone()));
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.violations().is_empty()
    }
}

/// One (label, span) unit; spans are surface strings, not offsets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelSpanPair {
    pub label: String,
    pub span: String,
}

impl LabelSpanPair {
    pub fn new(label: impl Into<String>, span: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            span: span.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub object: String,
    pub relation: String,
    pub subject: String,
}

impl Triple {
    pub fn new(
        object: impl Into<String>,
        relation: impl Into<String>,
        subject: impl Into<String>,
    ) -> Self {
        Self {
            object: object.into(),
            relation: relation.into(),
            subject: subject.into(),
        }
    }
}

/// Four opaque event fields, kept in order.
pub type Quad = [String; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    Pairs,
    Triples,
    Quads,
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PayloadKind::Pairs => "pairs",
            PayloadKind::Triples => "triples",
            PayloadKind::Quads => "quads",
        })
    }
}

/// Word-level extraction result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordPayload {
    Pairs(Vec<LabelSpanPair>),
    Triples(Vec<Triple>),
    Quads(Vec<Quad>),
}

impl WordPayload {
    pub fn empty(kind: PayloadKind) -> Self {
        match kind {
            PayloadKind::Pairs => WordPayload::Pairs(Vec::new()),
            PayloadKind::Triples => WordPayload::Triples(Vec::new()),
            PayloadKind::Quads => WordPayload::Quads(Vec::new()),
        }
    }

    pub fn kind(&self) -> PayloadKind {
        match self {
            WordPayload::Pairs(_) => PayloadKind::Pairs,
            WordPayload::Triples(_) => PayloadKind::Triples,
            WordPayload::Quads(_) => PayloadKind::Quads,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            WordPayload::Pairs(v) => v.len(),
            WordPayload::Triples(v) => v.len(),
            WordPayload::Quads(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every unit as a list of its component strings, in field order.
    pub fn units(&self) -> Vec<Vec<&str>> {
        match self {
            WordPayload::Pairs(v) => v
                .iter()
                .map(|p| vec![p.label.as_str(), p.span.as_str()])
                .collect(),
            WordPayload::Triples(v) => v
                .iter()
                .map(|t| vec![t.object.as_str(), t.relation.as_str(), t.subject.as_str()])
                .collect(),
            WordPayload::Quads(v) => v
                .iter()
                .map(|q| q.iter().map(String::as_str).collect())
                .collect(),
        }
    }

    /// The label-like field of each unit: pair label, relation, or the first event field.
    pub fn unit_labels(&self) -> Vec<&str> {
        match self {
            WordPayload::Pairs(v) => v.iter().map(|p| p.label.as_str()).collect(),
            WordPayload::Triples(v) => v.iter().map(|t| t.relation.as_str()).collect(),
            WordPayload::Quads(v) => v.iter().map(|q| q[0].as_str()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedSample {
    pub id: String,
    pub text: String,
    pub gold_label: String,
    pub gold_payload: WordPayload,
    /// Set on machine-labelled records awaiting human review.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub draft: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MixedSample {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        gold_label: impl Into<String>,
        gold_payload: WordPayload,
    ) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            gold_label: gold_label.into(),
            gold_payload,
            draft: false,
            notes: Vec::new(),
        }
    }
}

/// A single broken invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Violation {
    EmptyLabelSet,
    BadSpecLabel(String),
    DuplicateSpecLabel(String),
    BadInstructionWord(String),
    EmptyText,
    LabelNotInSet(String),
    VariantMismatch {
        expected: String,
        found: String,
    },
    /// A unit component that is empty once normalized.
    EmptyComponent {
        unit: usize,
        field: usize,
    },
    TooManyUnits {
        max: usize,
        found: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyLabelSet => write!(f, "label set is empty"),
            Violation::BadSpecLabel(l) => {
                write!(f, "label {l:?} is empty or contains a reserved character")
            }
            Violation::DuplicateSpecLabel(l) => write!(f, "label {l:?} appears twice"),
            Violation::BadInstructionWord(iw) => {
                write!(
                    f,
                    "instruction word {iw:?} is empty or contains a reserved character"
                )
            }
            Violation::EmptyText => write!(f, "text is empty"),
            Violation::LabelNotInSet(l) => write!(f, "gold label {l:?} is not in the label set"),
            Violation::VariantMismatch { expected, found } => {
                write!(f, "payload is {found}, task expects {expected}")
            }
            Violation::EmptyComponent { unit, field } => {
                write!(f, "unit {unit} field {field} is empty")
            }
            Violation::TooManyUnits { max, found } => {
                write!(f, "{found} units, at most {max} allowed")
            }
        }
    }
}

pub type ValidationReport = Vec<Violation>;

/// Lists every invariant the sample (and its spec) breaks.
///
/// Component strings may contain reserved characters: the codec escapes them,
/// so the only payload-level requirement is that no component normalizes to
/// the empty string.
pub fn validate_sample(sample: &MixedSample, spec: &TaskSpec) -> ValidationReport {
    let mut out = spec.violations();
    if normalize(&sample.text).is_empty() {
        out.push(Violation::EmptyText);
    }
    if !spec.has_label(&sample.gold_label) {
        out.push(Violation::LabelNotInSet(sample.gold_label.clone()));
    }
    let expected = spec.word_task.payload_kind();
    let found = sample.gold_payload.kind();
    if expected != found {
        out.push(Violation::VariantMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    for (u, unit) in sample.gold_payload.units().iter().enumerate() {
        for (i, field) in unit.iter().enumerate() {
            if normalize(field).is_empty() {
                out.push(Violation::EmptyComponent { unit: u, field: i });
            }
        }
    }
    if let Some(max) = spec.max_units {
        let found = sample.gold_payload.len();
        if found > max {
            out.push(Violation::TooManyUnits { max, found });
        }
    }
    out
}
