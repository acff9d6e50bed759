use std::collections::HashMap;

use crate::codec::{build_input, encode_output, CodecError, SerializedInput};
use crate::dataset::DatasetFile;

use super::{Backend, BackendError};

/// Answers every dataset input with its gold serialization.
#[derive(Debug, Clone)]
pub struct MockGoldBackend {
    answers: HashMap<String, String>,
}

impl MockGoldBackend {
    /// When two samples share an input, the first one wins.
    pub fn new(dataset: &DatasetFile) -> Result<Self, CodecError> {
        let spec = &dataset.task_spec;
        let mut answers = HashMap::with_capacity(dataset.samples.len());
        for s in &dataset.samples {
            let input = build_input(&s.text, spec)?;
            let output = encode_output(&s.gold_label, &s.gold_payload, spec)?;
            answers
                .entry(input.into_string())
                .or_insert_with(|| output.into_string());
        }
        Ok(Self { answers })
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

impl Backend for MockGoldBackend {
    fn name(&self) -> &str {
        "mock-gold"
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn complete(&self, input: &SerializedInput) -> Result<String, BackendError> {
        self.answers
            .get(input.as_str())
            .cloned()
            .ok_or(BackendError::UnknownInput)
    }
}
