mod common;

use std::sync::atomic::{AtomicUsize, Ordering};

use common::{data_file, fixture, spec_for, synthetic_dataset};
use unified_ie::dataset::{
    draft_label, extract_candidates, load_rules, split, stats, CorpusLayout, RuleKind,
};
use unified_ie::harness::{
    read_run_dir, BaselineBackend, FnBackend, Gazetteer, MockGoldBackend, ResponseCache,
};
use unified_ie::model::{LabelSpanPair, MixedSample, TextTask, WordPayload, WordTask};
use unified_ie::{
    encode_output, read_jsonl, run_eval, write_jsonl, DatasetFile, EvalConfig, IwRegistry, TaskSpec,
};

#[test]
fn fixture_datasets_round_trip_byte_for_byte() {
    for name in ["tcree_re.jsonl", "scnm_small.jsonl"] {
        let path = fixture(name);
        let ds = read_jsonl(&path).unwrap();
        ds.validate().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join(name);
        write_jsonl(&ds, &out).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&out).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn tcree_fixture_stats() {
    let ds = read_jsonl(fixture("tcree_re.jsonl")).unwrap();
    let s = stats(&ds);
    assert_eq!(s.samples, 10);
    assert_eq!(s.units, 10);
    assert_eq!(s.text_labels.len(), 5);
    assert_eq!(s.word_labels.len(), 7);
    assert_eq!(s.text_labels.values().sum::<usize>(), 10);
    assert!(s.render().contains("word labels  (7)"));
}

#[test]
fn livedoor_extraction() {
    let rules = load_rules(data_file("tcree-default.rules")).unwrap();
    let ex =
        extract_candidates(&fixture("livedoor/text"), &rules, &CorpusLayout::livedoor()).unwrap();
    assert_eq!(ex.articles, 4);
    assert!(ex.diagnostics.is_empty(), "{:?}", ex.diagnostics);
    let got: Vec<(&str, &str, RuleKind)> = ex
        .candidates
        .iter()
        .map(|c| (c.article_id.as_str(), c.sentence.as_str(), c.yields))
        .collect();
    assert_eq!(
        got,
        vec![
            (
                "it-life-hack/it-life-hack-1",
                "新型スマートフォンが発売された。",
                RuleKind::Ee
            ),
            (
                "movie-enter/movie-enter-1",
                "新作映画が来月公開される予定。",
                RuleKind::Ee
            ),
            (
                "movie-enter/movie-enter-1",
                "主演は東京出身の俳優だ。",
                RuleKind::Re
            ),
            (
                "sports-watch/sports-watch-1",
                "本田選手がミランに移籍した。",
                RuleKind::Re
            ),
            (
                "sports-watch/sports-watch-1",
                "チームは次の試合に勝利した。",
                RuleKind::Ee
            ),
        ]
    );
    assert_eq!(ex.candidates[3].category.as_deref(), Some("sports-watch"));
}

#[test]
fn draft_labelling_from_extracted_candidates() {
    let rules = load_rules(data_file("tcree-default.rules")).unwrap();
    let ex =
        extract_candidates(&fixture("livedoor/text"), &rules, &CorpusLayout::livedoor()).unwrap();
    let spec = TaskSpec::new(TextTask::Tc(common::topic_labels()), WordTask::Re).with_max_units(1);
    let backend = FnBackend::new("scripted", true, |input: &unified_ie::SerializedInput| {
        if input.as_str().starts_with("本田") {
            Ok("<sports>Relation Extraction:本田;所属;ミラン:".to_owned())
        } else if input.as_str().starts_with("主演") {
            Err(unified_ie::harness::BackendError::Timeout)
        } else {
            Ok("garbage".to_owned())
        }
    });
    let out = draft_label(&ex.candidates, &backend, &spec);
    assert_eq!(out.errors.len(), 1);
    assert_eq!(out.errors[0].id, "movie-enter/movie-enter-1#2");
    assert_eq!(out.dataset.len(), 4);
    assert!(out.dataset.samples.iter().all(|s| s.draft));
    let honda = &out.dataset.samples[2];
    assert_eq!(honda.gold_label, "sports");
    assert_eq!(honda.gold_payload.len(), 1);
    assert!(honda.notes.is_empty());
    assert!(!out.dataset.samples[0].notes.is_empty());
    out.dataset.validate().unwrap();
    let reread = DatasetFile::from_jsonl_str(&out.dataset.to_jsonl()).unwrap();
    assert_eq!(reread, out.dataset);
}

#[test]
fn japanese_profile_loads() {
    let reg = IwRegistry::load(data_file("ja.profile")).unwrap();
    for t in WordTask::ALL {
        assert!(!reg.get(t).is_empty());
    }
    let spec = TaskSpec::with_registry(TextTask::default_polarity(), WordTask::Ner, &reg);
    assert_ne!(
        spec.instruction_word,
        spec_for(WordTask::Ner).instruction_word
    );
}

fn planted() -> (DatasetFile, Gazetteer) {
    let spec = TaskSpec::new(
        TextTask::Tc(vec!["sports".into(), "movies".into()]),
        WordTask::Ner,
    );
    let rows = [
        (
            "p1",
            "本田とミランの話",
            "sports",
            [("PER", "本田"), ("ORG", "ミラン")],
        ),
        (
            "p2",
            "宮崎と東京の話",
            "movies",
            [("PER", "宮崎"), ("LOC", "東京")],
        ),
        (
            "p3",
            "大阪でイチローが",
            "sports",
            [("LOC", "大阪"), ("PER", "イチロー")],
        ),
        (
            "p4",
            "ソニーと京都",
            "sports",
            [("ORG", "ソニー"), ("LOC", "京都")],
        ),
    ];
    let samples = rows
        .iter()
        .map(|(id, text, label, pairs)| {
            MixedSample::new(
                *id,
                *text,
                *label,
                WordPayload::Pairs(
                    pairs
                        .iter()
                        .map(|(l, s)| LabelSpanPair::new(*l, *s))
                        .collect(),
                ),
            )
        })
        .collect();
    let mut gaz = Gazetteer::default();
    gaz.label_counts.insert("sports".into(), 3);
    gaz.label_counts.insert("movies".into(), 1);
    gaz.entries = vec![
        LabelSpanPair::new("PER", "本田"),
        LabelSpanPair::new("LOC", "東京"),
        LabelSpanPair::new("PER", "イチロー"),
        LabelSpanPair::new("ORG", "ソニー"),
        LabelSpanPair::new("ORG", "存在しない"),
    ];
    (DatasetFile::new(spec, samples), gaz)
}

#[test]
fn baseline_scores_planted_half() {
    let (ds, gaz) = planted();
    let backend = BaselineBackend::new(gaz, ds.task_spec.clone());
    assert_eq!(backend.predicted_label(), "sports");
    let run = run_eval(&ds, &backend, &EvalConfig::default()).unwrap();
    assert_eq!(run.report.wl_accuracy, Some(0.5));
    assert_eq!(run.report.tl_accuracy, 0.75);
    assert_eq!(run.report.all_accuracy, 0.0);
    assert!(run.records.iter().all(|r| r.parse.diagnostics.is_empty()));
}

#[test]
fn mock_gold_backend_is_perfect_on_fixtures() {
    for name in ["tcree_re.jsonl", "scnm_small.jsonl"] {
        let ds = read_jsonl(fixture(name)).unwrap();
        let backend = MockGoldBackend::new(&ds).unwrap();
        let run = run_eval(&ds, &backend, &EvalConfig::default()).unwrap();
        assert_eq!(run.report.tl_accuracy, 1.0, "{name}");
        assert_eq!(run.report.all_accuracy, 1.0, "{name}");
        assert_eq!(run.report.wl_accuracy, Some(1.0), "{name}");
    }
}

struct Counting<'a> {
    calls: &'a AtomicUsize,
    inner: MockGoldBackend,
}

impl unified_ie::Backend for Counting<'_> {
    fn name(&self) -> &str {
        "counting"
    }
    fn deterministic(&self) -> bool {
        true
    }
    fn complete(
        &self,
        input: &unified_ie::SerializedInput,
    ) -> Result<String, unified_ie::harness::BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(input)
    }
}

#[test]
fn warm_cache_makes_no_backend_calls() {
    let ds = synthetic_dataset(spec_for(WordTask::Ee), 40, 3);
    let dir = tempfile::tempdir().unwrap();
    let config = EvalConfig {
        cache_dir: Some(dir.path().to_path_buf()),
        ..EvalConfig::default()
    };
    let calls = AtomicUsize::new(0);
    let backend = Counting {
        calls: &calls,
        inner: MockGoldBackend::new(&ds).unwrap(),
    };
    let cold = run_eval(&ds, &backend, &config).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 40);
    assert_eq!(cold.stats.backend_calls, 40);
    let warm = run_eval(&ds, &backend, &config).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 40);
    assert_eq!(warm.stats.cache_hits, 40);
    assert_eq!(warm.stats.backend_calls, 0);
    assert_eq!(cold.report_json(), warm.report_json());
    assert_eq!(cold.records, warm.records);
}

#[test]
fn corrupt_cache_file_is_an_error() {
    let ds = synthetic_dataset(spec_for(WordTask::Ner), 3, 4);
    let dir = tempfile::tempdir().unwrap();
    let config = EvalConfig {
        cache_dir: Some(dir.path().to_path_buf()),
        ..EvalConfig::default()
    };
    let backend = MockGoldBackend::new(&ds).unwrap();
    run_eval(&ds, &backend, &config).unwrap();
    let input = unified_ie::build_input(&ds.samples[0].text, &ds.task_spec).unwrap();
    let key = unified_ie::harness::cache_key("mock-gold", None, input.as_str());
    let path = ResponseCache::new(dir.path()).entry_path(&key);
    std::fs::write(&path, "{not json").unwrap();
    assert!(matches!(
        run_eval(&ds, &backend, &config),
        Err(unified_ie::harness::HarnessError::CacheCorrupt { .. })
    ));
}

#[test]
fn parallelism_does_not_change_results() {
    let ds = synthetic_dataset(spec_for(WordTask::SentNAdj), 120, 9);
    let spec = ds.task_spec.clone();
    let gold = ds.clone();
    let backend = FnBackend::new(
        "half-right",
        true,
        move |input: &unified_ie::SerializedInput| {
            let idx = gold
                .samples
                .iter()
                .position(|s| unified_ie::build_input(&s.text, &spec).unwrap() == *input)
                .unwrap();
            let s = &gold.samples[idx];
            let payload = if idx % 2 == 0 {
                s.gold_payload.clone()
            } else {
                WordPayload::empty(s.gold_payload.kind())
            };
            Ok(encode_output(&s.gold_label, &payload, &spec)
                .unwrap()
                .into_string())
        },
    );
    let one = run_eval(&ds, &backend, &EvalConfig::default()).unwrap();
    let eight = run_eval(
        &ds,
        &backend,
        &EvalConfig {
            parallelism: 8,
            ..EvalConfig::default()
        },
    )
    .unwrap();
    assert_eq!(one.report_json(), eight.report_json());
    assert_eq!(one.records, eight.records);
}

#[test]
fn run_directory_round_trip() {
    let ds = read_jsonl(fixture("scnm_small.jsonl")).unwrap();
    let backend = MockGoldBackend::new(&ds).unwrap();
    let run = run_eval(&ds, &backend, &EvalConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run.write_dir(dir.path()).unwrap();
    for f in ["records.jsonl", "report.json", "config.json", "stats.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let back = read_run_dir(dir.path()).unwrap();
    assert_eq!(back.report, run.report);
    assert_eq!(back.records, run.records);
    assert_eq!(back.snapshot, run.snapshot);
}

#[test]
fn split_is_seeded_and_disjoint() {
    let ds = synthetic_dataset(spec_for(WordTask::Re), 50, 1);
    let (a1, b1) = split(&ds, 20, 7).unwrap();
    let (a2, _) = split(&ds, 20, 7).unwrap();
    let (a3, _) = split(&ds, 20, 8).unwrap();
    assert_eq!(a1, a2);
    assert_ne!(a1, a3);
    assert_eq!((a1.len(), b1.len()), (20, 30));
    let mut ids: Vec<&str> = a1
        .samples
        .iter()
        .chain(&b1.samples)
        .map(|s| s.id.as_str())
        .collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 50);
}
