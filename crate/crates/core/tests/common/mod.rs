#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unified_ie::model::{
    LabelSpanPair, MixedSample, TaskSpec, TextTask, Triple, WordPayload, WordTask,
};
use unified_ie::DatasetFile;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

pub struct StubRequest {
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl StubRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).expect("request body is JSON")
    }
}

/// Minimal HTTP/1.1 server answering every request through `handler`.
/// The handler gets the zero-based call number and the request.
pub struct StubServer {
    pub url: String,
    pub calls: Arc<AtomicUsize>,
}

impl StubServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(usize, &StubRequest) -> (u16, String) + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let calls = Arc::new(AtomicUsize::new(0));
        let counter = calls.clone();
        let handler = Arc::new(handler);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let counter = counter.clone();
                let handler = handler.clone();
                std::thread::spawn(move || {
                    let mut reader = BufReader::new(stream.try_clone().unwrap());
                    let mut headers = Vec::new();
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    loop {
                        line.clear();
                        if reader.read_line(&mut line).unwrap() == 0 {
                            return;
                        }
                        let l = line.trim_end();
                        if l.is_empty() {
                            break;
                        }
                        if let Some((k, v)) = l.split_once(':') {
                            headers.push((k.trim().to_owned(), v.trim().to_owned()));
                        }
                    }
                    let len: usize = headers
                        .iter()
                        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
                        .map(|(_, v)| v.parse().unwrap())
                        .unwrap_or(0);
                    let mut body = vec![0u8; len];
                    reader.read_exact(&mut body).unwrap();
                    let req = StubRequest {
                        headers,
                        body: String::from_utf8(body).unwrap(),
                    };
                    let n = counter.fetch_add(1, Ordering::SeqCst);
                    let (status, body) = handler(n, &req);
                    let resp = format!(
                        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                        body.len()
                    );
                    let _ = stream.write_all(resp.as_bytes());
                });
            }
        });
        Self { url, calls }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

pub fn chat_reply(content: &str) -> String {
    serde_json::json!({
        "id": "stub",
        "object": "chat.completion",
        "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
    })
    .to_string()
}

pub fn topic_labels() -> Vec<String> {
    ["sports", "movies", "women", "IT", "CM"]
        .map(String::from)
        .to_vec()
}

pub fn spec_for(task: WordTask) -> TaskSpec {
    let text = if task.is_sentiment() {
        TextTask::default_polarity()
    } else {
        TextTask::Tc(topic_labels())
    };
    TaskSpec::new(text, task)
}

const WORDS: [&str; 8] = [
    "東京", "Taro", "Sony", "映画", "soccer", "大阪", "Apple", "音楽",
];
const UNIT_LABELS: [&str; 4] = ["PER", "LOC", "ORG", "MISC"];

pub fn random_payload(rng: &mut ChaCha8Rng, task: WordTask, max_units: usize) -> WordPayload {
    let n = rng.random_range(0..=max_units);
    let word = |rng: &mut ChaCha8Rng| WORDS[rng.random_range(0..WORDS.len())].to_owned();
    match task.payload_kind() {
        unified_ie::model::PayloadKind::Pairs => WordPayload::Pairs(
            (0..n)
                .map(|_| {
                    LabelSpanPair::new(
                        UNIT_LABELS[rng.random_range(0..UNIT_LABELS.len())],
                        word(rng),
                    )
                })
                .collect(),
        ),
        unified_ie::model::PayloadKind::Triples => WordPayload::Triples(
            (0..n)
                .map(|_| Triple::new(word(rng), UNIT_LABELS[rng.random_range(0..4)], word(rng)))
                .collect(),
        ),
        unified_ie::model::PayloadKind::Quads => WordPayload::Quads(
            (0..n)
                .map(|_| {
                    [
                        word(rng),
                        UNIT_LABELS[rng.random_range(0..4)].to_owned(),
                        word(rng),
                        word(rng),
                    ]
                })
                .collect(),
        ),
    }
}

/// `n` valid samples with distinct texts under `spec`.
pub fn synthetic_dataset(spec: TaskSpec, n: usize, seed: u64) -> DatasetFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = spec.labels().to_vec();
    let samples = (0..n)
        .map(|i| {
            let label = labels[rng.random_range(0..labels.len())].clone();
            let payload = random_payload(&mut rng, spec.word_task, 4);
            MixedSample::new(
                format!("s{i:05}"),
                format!("synthetic sentence {i}."),
                label,
                payload,
            )
        })
        .collect();
    DatasetFile::new(spec, samples)
}
