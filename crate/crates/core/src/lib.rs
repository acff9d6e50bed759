//! Unified input/output schema for mixed information-extraction tasks.
//!
//! * [`codec`]: mark-token grammar (`<label>IW:...`) in both directions.
//! * [`scorer`]: TL / WL / ALL accuracies and the repeated-sampling protocol.
//! * [`dataset`]: JSONL storage, splits, statistics, candidate extraction
//!   and draft labelling.
//! * [`harness`]: backends (HTTP, mock, baseline), caching and evaluation runs.
//!
//! Accuracy reports are generic over the [`Scalar`] type; [`FloatReport`]
//! and [`ExactReport`] are the two instantiations used in practice.

pub mod codec;
pub mod dataset;
pub mod harness;
pub mod iw;
pub mod model;
pub mod scalar;
pub mod scorer;

pub use codec::{
    build_input, encode_output, parse_bytes_tolerant, parse_output, parse_strict, parse_tolerant,
    CodecError, Diagnostic, DiagnosticKind, ParseMode, ParseOutcome, SerializedInput,
    SerializedOutput,
};
pub use dataset::{read_jsonl, write_jsonl, DatasetFile};
pub use harness::{run_eval, Backend, EvalConfig, EvalRun};
pub use iw::{iw_for, IwRegistry};
pub use model::{
    normalize_text, validate_sample, LabelSpanPair, MixedSample, NormalizationPolicy, TaskSpec,
    TextTask, Triple, WordPayload, WordTask,
};
pub use scalar::Scalar;
pub use scorer::{score_corpus, score_sequence, ScoreReport, SequenceScore};

/// Exact rational used for reference computations.
pub type Rational = num_rational::Rational64;

pub type FloatReport = scorer::ScoreReport<f64>;
pub type ExactReport = scorer::ScoreReport<Rational>;
pub type FloatSampledReport = scorer::SampledReport<f64>;
pub type ExactSampledReport = scorer::SampledReport<Rational>;
