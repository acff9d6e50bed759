use serde::{Deserialize, Serialize};

use super::{Candidate, DatasetFile};
use crate::codec::{build_input, parse_tolerant};
use crate::harness::Backend;
use crate::model::{MixedSample, TaskSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftError {
    pub index: usize,
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DraftOutcome {
    pub dataset: DatasetFile,
    pub errors: Vec<DraftError>,
}

fn draft_id(c: &Candidate, index: usize) -> String {
    format!("{}#{index}", c.article_id)
}

/// Machine-labels candidates with `backend` for later human review.
///
/// Every answered candidate becomes a `draft` sample, whatever the parse
/// quality; diagnostics go into the sample's notes and a missing label is
/// left empty. Candidates whose input cannot be built or whose backend call
/// fails are recorded in `errors` and the run continues.
pub fn draft_label(
    candidates: &[Candidate],
    backend: &dyn Backend,
    spec: &TaskSpec,
) -> DraftOutcome {
    let mut samples = Vec::new();
    let mut errors = Vec::new();
    for (index, c) in candidates.iter().enumerate() {
        let id = draft_id(c, index);
        let fail = |message: String| DraftError {
            index,
            id: id.clone(),
            message,
        };
        let input = match build_input(&c.sentence, spec) {
            Ok(i) => i,
            Err(e) => {
                errors.push(fail(e.to_string()));
                continue;
            }
        };
        let raw = match backend.complete(&input) {
            Ok(r) => r,
            Err(e) => {
                errors.push(fail(e.to_string()));
                continue;
            }
        };
        let parsed = parse_tolerant(&raw, spec);
        let mut sample = MixedSample::new(
            id.clone(),
            c.sentence.clone(),
            parsed.label.unwrap_or_default(),
            parsed.payload,
        );
        sample.draft = true;
        sample.notes = parsed.diagnostics.iter().map(ToString::to_string).collect();
        samples.push(sample);
    }
    DraftOutcome {
        dataset: DatasetFile::new(spec.clone(), samples),
        errors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::SerializedInput;
    use crate::dataset::RuleKind;
    use crate::harness::{BackendError, FnBackend, MockGoldBackend};
    use crate::model::{TextTask, Triple, WordPayload, WordTask};

    fn spec() -> TaskSpec {
        TaskSpec::new(
            TextTask::Tc(
                ["sports", "movies", "women", "IT", "CM"]
                    .map(String::from)
                    .to_vec(),
            ),
            WordTask::Re,
        )
        .with_max_units(1)
    }

    fn candidates() -> Vec<Candidate> {
        [
            "本田選手がミランに移籍した。",
            "新作映画が公開された。",
            "新型スマホが発売された。",
        ]
        .iter()
        .enumerate()
        .map(|(i, s)| Candidate {
            article_id: format!("a{i}"),
            category: None,
            sentence: s.to_string(),
            rule: "r".into(),
            yields: RuleKind::Re,
        })
        .collect()
    }

    fn planted() -> Vec<MixedSample> {
        let gold = [
            ("sports", Triple::new("本田", "所属", "ミラン")),
            ("movies", Triple::new("新作映画", "状態", "公開")),
            ("IT", Triple::new("新型スマホ", "状態", "発売")),
        ];
        candidates()
            .iter()
            .zip(gold)
            .enumerate()
            .map(|(i, (c, (label, t)))| {
                MixedSample::new(
                    draft_id(c, i),
                    c.sentence.clone(),
                    label,
                    WordPayload::Triples(vec![t]),
                )
            })
            .collect()
    }

    #[test]
    fn gold_echo_reproduces_planted_labels() {
        let gold = DatasetFile::new(spec(), planted());
        let mock = MockGoldBackend::new(&gold).unwrap();
        let out = draft_label(&candidates(), &mock, &spec());
        assert!(out.errors.is_empty());
        assert_eq!(out.dataset.len(), 3);
        for (d, g) in out.dataset.samples.iter().zip(&gold.samples) {
            assert!(d.draft);
            assert!(d.notes.is_empty());
            assert_eq!(
                (&d.id, &d.gold_label, &d.gold_payload),
                (&g.id, &g.gold_label, &g.gold_payload)
            );
        }
    }

    #[test]
    fn garbage_gives_empty_payloads_with_notes() {
        let junk = FnBackend::new("junk", true, |_: &SerializedInput| Ok("???".to_owned()));
        let out = draft_label(&candidates(), &junk, &spec());
        assert_eq!(out.dataset.len(), 3);
        for d in &out.dataset.samples {
            assert!(d.gold_payload.is_empty());
            assert!(d.gold_label.is_empty());
            assert!(!d.notes.is_empty());
        }
    }

    #[test]
    fn scripted_timeout_is_recorded() {
        let gold = DatasetFile::new(spec(), planted());
        let mock = MockGoldBackend::new(&gold).unwrap();
        let scripted = FnBackend::new("scripted", true, |input: &SerializedInput| {
            if input.as_str().starts_with("新作映画") {
                Err(BackendError::Timeout)
            } else {
                mock.complete(input)
            }
        });
        let out = draft_label(&candidates(), &scripted, &spec());
        assert_eq!(out.dataset.len(), 2);
        assert_eq!(
            out.errors,
            vec![DraftError {
                index: 1,
                id: "a1#1".into(),
                message: "request timed out".into()
            }]
        );
        // Drafts survive a JSONL round trip even with empty labels.
        let text = out.dataset.to_jsonl();
        assert_eq!(DatasetFile::from_jsonl_str(&text).unwrap(), out.dataset);
    }
}
