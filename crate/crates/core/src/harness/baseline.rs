use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{encode_output, input_text, SerializedInput};
use crate::dataset::DatasetFile;
use crate::model::{LabelSpanPair, PayloadKind, TaskSpec, WordPayload};

use super::{Backend, BackendError};

/// Label priors and surface strings for the string-matching baseline.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gazetteer {
    #[serde(default)]
    pub label_counts: BTreeMap<String, u64>,
    #[serde(default)]
    pub entries: Vec<LabelSpanPair>,
}

impl Gazetteer {
    /// Collects label frequencies and every gold pair of a (training) dataset.
    pub fn from_dataset(ds: &DatasetFile) -> Self {
        let mut g = Gazetteer::default();
        for s in &ds.samples {
            *g.label_counts.entry(s.gold_label.clone()).or_default() += 1;
            if let WordPayload::Pairs(pairs) = &s.gold_payload {
                for p in pairs {
                    if !g.entries.contains(p) {
                        g.entries.push(p.clone());
                    }
                }
            }
        }
        g
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

/// Majority label plus exact gazetteer matches. A smoke-test floor, not a model.
#[derive(Debug, Clone)]
pub struct BaselineBackend {
    gazetteer: Gazetteer,
    spec: TaskSpec,
    label: String,
}

impl BaselineBackend {
    pub fn new(gazetteer: Gazetteer, spec: TaskSpec) -> Self {
        // Highest prior wins; ties go to the earlier candidate label.
        let label = spec
            .labels()
            .iter()
            .enumerate()
            .max_by_key(|(i, l)| {
                (
                    gazetteer.label_counts.get(*l).copied().unwrap_or(0),
                    std::cmp::Reverse(*i),
                )
            })
            .map(|(_, l)| l.clone())
            .unwrap_or_default();
        Self {
            gazetteer,
            spec,
            label,
        }
    }

    pub fn predicted_label(&self) -> &str {
        &self.label
    }

    fn matches(&self, text: &str) -> Vec<LabelSpanPair> {
        let mut hits: Vec<(usize, usize, &LabelSpanPair)> = self
            .gazetteer
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.span.is_empty() && !e.label.is_empty())
            .filter_map(|(i, e)| text.find(e.span.as_str()).map(|pos| (pos, i, e)))
            .collect();
        hits.sort_by_key(|(pos, i, _)| (*pos, *i));
        hits.into_iter().map(|(_, _, e)| e.clone()).collect()
    }
}

impl Backend for BaselineBackend {
    fn name(&self) -> &str {
        "baseline"
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn complete(&self, input: &SerializedInput) -> Result<String, BackendError> {
        let text = input_text(input, &self.spec).unwrap_or(input.as_str());
        let payload = match self.spec.word_task.payload_kind() {
            PayloadKind::Pairs => WordPayload::Pairs(self.matches(text)),
            kind => WordPayload::empty(kind),
        };
        encode_output(&self.label, &payload, &self.spec)
            .map(|o| o.into_string())
            .map_err(|e| BackendError::Other {
                message: e.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::build_input;
    use crate::model::{TextTask, WordTask};

    fn spec() -> TaskSpec {
        TaskSpec::new(TextTask::Tc(vec!["a".into(), "b".into()]), WordTask::Ner)
    }

    #[test]
    fn majority_label_and_matches() {
        let g = Gazetteer {
            label_counts: [("b".to_owned(), 3), ("a".to_owned(), 1)].into(),
            entries: vec![
                LabelSpanPair::new("LOC", "Tokyo"),
                LabelSpanPair::new("PER", "Taro"),
                LabelSpanPair::new("ORG", "Sony"),
            ],
        };
        let b = BaselineBackend::new(g, spec());
        let input = build_input("Taro went to Tokyo", &spec()).unwrap();
        assert_eq!(
            b.complete(&input).unwrap(),
            "<b>Named Entity Recognition:PER;Taro:LOC;Tokyo"
        );
    }

    #[test]
    fn empty_gazetteer_gives_label_only() {
        let b = BaselineBackend::new(Gazetteer::default(), spec());
        let input = build_input("Taro went to Tokyo", &spec()).unwrap();
        assert_eq!(b.complete(&input).unwrap(), "<a>Named Entity Recognition");
    }

    #[test]
    fn labels_in_the_suffix_are_not_matched() {
        let g = Gazetteer {
            label_counts: BTreeMap::new(),
            entries: vec![LabelSpanPair::new("X", "Entity")],
        };
        let b = BaselineBackend::new(g, spec());
        let input = build_input("nothing here", &spec()).unwrap();
        assert_eq!(b.complete(&input).unwrap(), "<a>Named Entity Recognition");
    }
}
