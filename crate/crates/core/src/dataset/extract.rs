//! Rule-based candidate extraction over a news corpus.
//!
//! Rule files are UTF-8 text, one rule per line:
//!
//! ```text
//! # name        yields  pattern (regex over the normalized sentence)
//! occupation    RE      (選手|監督|俳優)
//! release       EE      (発売|公開)(する|した|される|された)
//! ```
//!
//! The first two whitespace-separated fields are the rule name and the kind
//! of candidate it yields (`RE` or `EE`); the remainder of the line is the
//! pattern. Blank lines and `#` comments are skipped. Names must be unique.
//!
//! Corpus layout: one article per file. Files under a subdirectory take that
//! subdirectory as their category. The Livedoor news dump
//! (`text/<category>/<category>-<n>.txt`, URL and date on the first two
//! lines, a `LICENSE.txt` per category) is handled by
//! [`CorpusLayout::livedoor`].

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::DatasetError;
use crate::model::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleKind {
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "EE")]
    Ee,
}

#[derive(Debug, Clone)]
pub struct ExtractionRule {
    pub name: String,
    pub yields: RuleKind,
    pub pattern: Regex,
}

pub fn parse_rules(src: &str) -> Result<Vec<ExtractionRule>, DatasetError> {
    let mut rules: Vec<ExtractionRule> = Vec::new();
    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let bad = |message: String| DatasetError::BadRule { line, message };
        let mut parts = text.splitn(2, char::is_whitespace);
        let name = parts.next().unwrap_or_default();
        let rest = parts.next().unwrap_or_default().trim_start();
        let mut parts = rest.splitn(2, char::is_whitespace);
        let kind = parts.next().unwrap_or_default();
        let pattern = parts.next().unwrap_or_default().trim();
        let yields = match kind {
            "RE" => RuleKind::Re,
            "EE" => RuleKind::Ee,
            other => return Err(bad(format!("kind must be RE or EE, found {other:?}"))),
        };
        if pattern.is_empty() {
            return Err(bad("missing pattern".into()));
        }
        if rules.iter().any(|r| r.name == name) {
            return Err(bad(format!("duplicate rule name {name:?}")));
        }
        let pattern = Regex::new(pattern).map_err(|e| bad(e.to_string()))?;
        rules.push(ExtractionRule {
            name: name.to_owned(),
            yields,
            pattern,
        });
    }
    Ok(rules)
}

pub fn load_rules(path: impl AsRef<Path>) -> Result<Vec<ExtractionRule>, DatasetError> {
    let path = path.as_ref();
    let src = fs::read_to_string(path)
        .map_err(|e| DatasetError::io(format!("reading {}", path.display()), e))?;
    parse_rules(&src)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusLayout {
    /// Lines dropped from the top of each article before segmentation.
    pub header_lines: usize,
    /// File names that are not articles.
    pub skip_files: Vec<String>,
}

impl CorpusLayout {
    pub fn livedoor() -> Self {
        Self {
            header_lines: 2,
            skip_files: vec![
                "LICENSE.txt".into(),
                "README.txt".into(),
                "CHANGES.txt".into(),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    /// Path relative to the corpus root, without extension, `/`-separated.
    pub id: String,
    pub category: Option<String>,
    pub body: String,
}

/// Reads every article in sorted path order. Unreadable files are skipped
/// and reported in the returned diagnostics.
pub fn read_corpus(
    dir: &Path,
    layout: &CorpusLayout,
) -> Result<(Vec<Article>, Vec<String>), DatasetError> {
    if !dir.is_dir() {
        return Err(DatasetError::io(
            format!("reading corpus {}", dir.display()),
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut articles = Vec::new();
    let mut diagnostics = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                diagnostics.push(format!("unreadable entry: {e}"));
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy();
        if name.starts_with('.') || layout.skip_files.iter().any(|s| *s == name) {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(dir)
            .expect("walk stays under root");
        let text = match fs::read(entry.path()).map(String::from_utf8) {
            Ok(Ok(t)) => t,
            Ok(Err(_)) => {
                diagnostics.push(format!("{}: not valid UTF-8, skipped", rel.display()));
                continue;
            }
            Err(e) => {
                diagnostics.push(format!("{}: {e}, skipped", rel.display()));
                continue;
            }
        };
        let id = rel
            .with_extension("")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let category = rel
            .parent()
            .and_then(|p| p.file_name())
            .map(|c| c.to_string_lossy().into_owned());
        let body = text
            .lines()
            .skip(layout.header_lines)
            .collect::<Vec<_>>()
            .join("\n");
        articles.push(Article { id, category, body });
    }
    Ok((articles, diagnostics))
}

/// Splits on `。` (kept with its sentence) and on newlines; drops empty pieces.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let mut rest = line;
        while let Some(pos) = rest.find('。') {
            let end = pos + '。'.len_utf8();
            out.push(&rest[..end]);
            rest = &rest[end..];
        }
        out.push(rest);
    }
    out.into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub article_id: String,
    #[serde(default)]
    pub category: Option<String>,
    /// Normalized sentence text.
    pub sentence: String,
    pub rule: String,
    pub yields: RuleKind,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub candidates: Vec<Candidate>,
    pub diagnostics: Vec<String>,
    pub articles: usize,
    pub sentences: usize,
}

/// Applies `rules` to every sentence of every article. A sentence becomes at
/// most one candidate: the first matching rule (in file order) wins, and a
/// sentence already seen in an earlier article is dropped.
pub fn extract_candidates(
    corpus_dir: &Path,
    rules: &[ExtractionRule],
    layout: &CorpusLayout,
) -> Result<Extraction, DatasetError> {
    if rules.is_empty() {
        return Err(DatasetError::NoRules);
    }
    let (articles, diagnostics) = read_corpus(corpus_dir, layout)?;
    let mut out = Extraction {
        diagnostics,
        articles: articles.len(),
        ..Extraction::default()
    };
    let mut seen = HashSet::new();
    for a in &articles {
        for sentence in segment_sentences(&a.body) {
            out.sentences += 1;
            let sentence = normalize(&sentence);
            let Some(rule) = rules.iter().find(|r| r.pattern.is_match(&sentence)) else {
                continue;
            };
            if !seen.insert(sentence.clone()) {
                continue;
            }
            out.candidates.push(Candidate {
                article_id: a.id.clone(),
                category: a.category.clone(),
                sentence,
                rule: rule.name.clone(),
                yields: rule.yields,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_file_parsing() {
        let rules = parse_rules("# c\n\nocc RE (選手|監督)\nrel  EE  発売 した\n").unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[1].name, "rel");
        assert_eq!(rules[1].yields, RuleKind::Ee);
        assert_eq!(rules[1].pattern.as_str(), "発売 した");
        assert!(matches!(
            parse_rules("a RE x\na EE y"),
            Err(DatasetError::BadRule { line: 2, .. })
        ));
        assert!(matches!(
            parse_rules("a XX y"),
            Err(DatasetError::BadRule { line: 1, .. })
        ));
        assert!(matches!(
            parse_rules("a RE ("),
            Err(DatasetError::BadRule { line: 1, .. })
        ));
        assert!(matches!(
            parse_rules("a RE"),
            Err(DatasetError::BadRule { line: 1, .. })
        ));
    }

    #[test]
    fn segmentation() {
        assert_eq!(
            segment_sentences("一文目。二文目。\n三行目\n\n  四。"),
            vec!["一文目。", "二文目。", "三行目", "四。"]
        );
    }

    #[test]
    fn empty_rules_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            extract_candidates(dir.path(), &[], &CorpusLayout::default()),
            Err(DatasetError::NoRules)
        ));
    }

    #[test]
    fn dedup_and_unreadable_files() {
        let dir = tempfile::tempdir().unwrap();
        let sports = dir.path().join("sports");
        fs::create_dir_all(&sports).unwrap();
        fs::write(sports.join("a.txt"), "本田選手が移籍した。天気は晴れ。").unwrap();
        fs::write(sports.join("b.txt"), "本田選手が移籍した。").unwrap();
        fs::write(sports.join("c.txt"), [0xffu8, 0xfe, 0x00]).unwrap();
        let rules = parse_rules("occ RE 選手").unwrap();
        let ex = extract_candidates(dir.path(), &rules, &CorpusLayout::default()).unwrap();
        assert_eq!(ex.candidates.len(), 1);
        assert_eq!(ex.candidates[0].article_id, "sports/a");
        assert_eq!(ex.candidates[0].category.as_deref(), Some("sports"));
        assert_eq!(ex.diagnostics.len(), 1);
        assert_eq!(ex.articles, 2);
        assert_eq!(ex.sentences, 3);
    }
}
