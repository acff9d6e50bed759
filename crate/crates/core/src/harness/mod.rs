//! Evaluation harness: anything that maps a serialized input to raw text.

mod baseline;
mod cache;
mod http;
mod mock;
mod run;

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::codec::{CodecError, SerializedInput};
use crate::scorer::ScoreError;

pub use baseline::{BaselineBackend, Gazetteer};
pub use cache::{cache_key, CacheEntry, ResponseCache};
pub use http::{HttpBackend, HttpConfig};
pub use mock::MockGoldBackend;
pub use run::{
    read_run_dir, recompute_report, run_eval, sampled_evaluation, EvalConfig, EvalRun, RunSnapshot,
    RunStats, SampleRecord,
};

/// Failure of a single completion request.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendError {
    #[error("environment variable {var} is not set")]
    AuthMissing { var: String },
    #[error("request timed out")]
    Timeout,
    #[error("remote returned status {status}: {body}")]
    RemoteError { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    BudgetExhausted { attempts: u32, last: String },
    #[error("transport error: {message}")]
    Transport { message: String },
    #[error("malformed response: {message}")]
    BadResponse { message: String },
    #[error("invalid backend configuration: {message}")]
    Config { message: String },
    #[error("input is not in the reference dataset")]
    UnknownInput,
    #[error("{message}")]
    Other { message: String },
}

/// Text-in/text-out model endpoint.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    /// Model identifier, when the backend has one; part of the cache key.
    fn model(&self) -> Option<&str> {
        None
    }

    /// Same input always yields the same output.
    fn deterministic(&self) -> bool;

    fn complete(&self, input: &SerializedInput) -> Result<String, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn model(&self) -> Option<&str> {
        (**self).model()
    }
    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }
    fn complete(&self, input: &SerializedInput) -> Result<String, BackendError> {
        (**self).complete(input)
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn model(&self) -> Option<&str> {
        (**self).model()
    }
    fn deterministic(&self) -> bool {
        (**self).deterministic()
    }
    fn complete(&self, input: &SerializedInput) -> Result<String, BackendError> {
        (**self).complete(input)
    }
}

/// Backend driven by a closure. Handy for scripted stubs.
pub struct FnBackend<F> {
    name: String,
    deterministic: bool,
    f: F,
}

impl<F> FnBackend<F>
where
    F: Fn(&SerializedInput) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(name: impl Into<String>, deterministic: bool, f: F) -> Self {
        Self {
            name: name.into(),
            deterministic,
            f,
        }
    }
}

impl<F> Backend for FnBackend<F>
where
    F: Fn(&SerializedInput) -> Result<String, BackendError> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }
    fn deterministic(&self) -> bool {
        self.deterministic
    }
    fn complete(&self, input: &SerializedInput) -> Result<String, BackendError> {
        (self.f)(input)
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("cache entry {path} is corrupt: {message}")]
    CacheCorrupt { path: String, message: String },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid run artifact {path}: {message}")]
    BadArtifact { path: String, message: String },
    #[error("parallelism must be at least 1")]
    ZeroParallelism,
    #[error("dataset sample {id}: {message}")]
    InvalidSample { id: String, message: String },
}

impl HarnessError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io {
            context: context.into(),
            source,
        }
    }
}
