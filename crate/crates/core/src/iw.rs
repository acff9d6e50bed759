//! Instruction-word registry.
//!
//! The instruction word (IW) is the short suffix that tells the model which
//! word-level task to run. Sentiment sub-tasks share a common prefix followed
//! by a variant word. Registries can be loaded from a language profile so the
//! strings can be swapped (e.g. for Japanese) without touching code.
//!
//! Profile format: UTF-8 text, one `key = value` per line. Blank lines and
//! lines starting with `#` are ignored. Values are taken verbatim after the
//! first `=` with surrounding whitespace trimmed. Recognised keys:
//!
//! ```text
//! NER, RE, EE                     full instruction words
//! SENT_PREFIX                     shared prefix for sentiment tasks
//! SENT_SEPARATOR                  joiner between prefix and variant (default: empty)
//! SENT_RW, SENT_N, SENT_ADJ, SENT_N_ADJ   variant words
//! ```
//!
//! A profile only needs the keys it overrides; the rest fall back to English.
//! `SENT_SEPARATOR` may be quoted (`SENT_SEPARATOR = " "`) to keep spaces.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::model::{is_reserved, WordTask, ESCAPE};

#[derive(Debug, Error)]
pub enum IwError {
    #[error("unknown task key {0:?}")]
    UnknownTask(String),
    #[error("profile line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("reading profile: {0}")]
    Io(#[from] std::io::Error),
}

const SENT_VARIANTS: [WordTask; 4] = [
    WordTask::SentRw,
    WordTask::SentN,
    WordTask::SentAdj,
    WordTask::SentNAdj,
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IwRegistry {
    words: BTreeMap<WordTask, String>,
    sentiment_prefix: String,
    separator: String,
}

impl Default for IwRegistry {
    fn default() -> Self {
        Self::english()
    }
}

impl IwRegistry {
    pub fn english() -> Self {
        let words = [
            (WordTask::Ner, "Named Entity Recognition"),
            (WordTask::Re, "Relation Extraction"),
            (WordTask::Ee, "Event Extraction"),
            (WordTask::SentRw, "Relation Word"),
            (WordTask::SentN, "Noun"),
            (WordTask::SentAdj, "Adjective"),
            (WordTask::SentNAdj, "Noun Adjective"),
        ]
        .into_iter()
        .map(|(t, w)| (t, w.to_owned()))
        .collect();
        Self {
            words,
            sentiment_prefix: "Sentiment Extraction".into(),
            separator: String::new(),
        }
    }

    /// Full instruction word for `task`.
    pub fn get(&self, task: WordTask) -> String {
        let word = self
            .words
            .get(&task)
            .map(String::as_str)
            .unwrap_or_default();
        if task.is_sentiment() {
            format!("{}{}{}", self.sentiment_prefix, self.separator, word)
        } else {
            word.to_owned()
        }
    }

    /// Looks up by task key (`"NER"`, `"SENT_ADJ"`, ...).
    pub fn get_by_key(&self, key: &str) -> Result<String, IwError> {
        WordTask::from_key(key)
            .map(|t| self.get(t))
            .ok_or_else(|| IwError::UnknownTask(key.to_owned()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IwError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(src: &str) -> Result<Self, IwError> {
        let mut reg = Self::english();
        for (idx, raw) in src.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(IwError::Syntax {
                    line: line_no,
                    message: "expected `key = value`".into(),
                });
            };
            let key = key.trim();
            let value = unquote(value.trim());
            if value.chars().any(|c| is_reserved(c) || c == ESCAPE) {
                return Err(IwError::Syntax {
                    line: line_no,
                    message: format!("value for {key} contains a reserved character"),
                });
            }
            match key {
                "SENT_PREFIX" => reg.sentiment_prefix = value,
                "SENT_SEPARATOR" => reg.separator = value,
                _ => {
                    let task = WordTask::from_key(key).ok_or_else(|| IwError::Syntax {
                        line: line_no,
                        message: format!("unknown key {key:?}"),
                    })?;
                    if value.is_empty() {
                        return Err(IwError::Syntax {
                            line: line_no,
                            message: format!("empty value for {key}"),
                        });
                    }
                    reg.words.insert(task, value);
                }
            }
        }
        Ok(reg)
    }

    /// Serializes back to profile text.
    pub fn to_profile(&self) -> String {
        let mut out = String::new();
        for t in [WordTask::Ner, WordTask::Re, WordTask::Ee] {
            out.push_str(&format!("{} = {}\n", t.key(), self.words[&t]));
        }
        out.push_str(&format!("SENT_PREFIX = {}\n", self.sentiment_prefix));
        out.push_str(&format!("SENT_SEPARATOR = \"{}\"\n", self.separator));
        for t in SENT_VARIANTS {
            out.push_str(&format!("{} = {}\n", t.key(), self.words[&t]));
        }
        out
    }
}

fn unquote(v: &str) -> String {
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        v[1..v.len() - 1].to_owned()
    } else {
        v.to_owned()
    }
}

/// Instruction word for `task` from the built-in English registry.
pub fn iw_for(task: WordTask) -> String {
    IwRegistry::english().get(task)
}
