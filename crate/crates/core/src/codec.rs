//! Mark-token codec.
//!
//! ```text
//! INPUT   := TEXT ("<" label ">")+ IW
//! OUTPUT  := "<" label ">" IW BODY
//! pairs   := (":" label ";" span)*
//! triples := (":" object ";" relation ";" subject ":")*
//! quads   := (":" f1 ";" f2 ";" f3 ";" f4 ":")*
//! ```
//!
//! Reserved characters and the backslash are escaped with a backslash inside
//! component strings. Adjacent triple/quad units may share a single `:`
//! when parsing; encoding always closes each unit with its own `:`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    is_reserved, normalize, LabelSpanPair, PayloadKind, TaskSpec, Triple, Violation, WordPayload,
    ESCAPE,
};

/// Text, candidate labels and instruction word, ready for a backend.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SerializedInput(String);

/// Chosen label, instruction word echo and extraction body.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SerializedOutput(String);

macro_rules! string_newtype {
    ($t:ty) => {
        impl $t {
            pub fn new_unchecked(s: impl Into<String>) -> Self {
                Self(s.into())
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
            pub fn into_string(self) -> String {
                self.0
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
        impl AsRef<str> for $t {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

string_newtype!(SerializedInput);
string_newtype!(SerializedOutput);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    Strict,
    Tolerant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    MissingLabel,
    MalformedLabel,
    LabelNotInSet,
    IwMismatch,
    MalformedBody,
    BadEscape,
    EmptyComponent,
    ArityMismatch,
    TrailingGarbage,
}

/// One problem found while parsing; `position` is a byte offset into the raw string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub position: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} at byte {}: {}",
            self.kind, self.position, self.message
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub label: Option<String>,
    pub payload: WordPayload,
    pub diagnostics: Vec<Diagnostic>,
    pub mode_used: ParseMode,
}

impl ParseOutcome {
    /// Outcome standing in for a prediction that never arrived.
    pub fn empty(kind: PayloadKind) -> Self {
        Self {
            label: None,
            payload: WordPayload::empty(kind),
            diagnostics: Vec::new(),
            mode_used: ParseMode::Tolerant,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("invalid task spec: {}", join_violations(.0))]
    InvalidSpec(Vec<Violation>),
    #[error("label {0:?} is not in the task's label set")]
    LabelNotInSet(String),
    #[error("payload is {found}, task expects {expected}")]
    VariantMismatch {
        expected: PayloadKind,
        found: PayloadKind,
    },
    #[error("unit {unit} has an empty component")]
    EmptyComponent { unit: usize },
    #[error("malformed label at byte {position}: {message}")]
    MalformedLabel { position: usize, message: String },
    #[error("malformed body at byte {position}: {message}")]
    MalformedBody { position: usize, message: String },
    #[error("trailing garbage at byte {position}: {message}")]
    TrailingGarbage { position: usize, message: String },
    #[error("arity mismatch at byte {position}: {message}")]
    ArityMismatch { position: usize, message: String },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<Diagnostic> for CodecError {
    fn from(d: Diagnostic) -> Self {
        let Diagnostic {
            position,
            kind,
            message,
        } = d;
        match kind {
            DiagnosticKind::MissingLabel
            | DiagnosticKind::MalformedLabel
            | DiagnosticKind::LabelNotInSet => CodecError::MalformedLabel { position, message },
            DiagnosticKind::ArityMismatch => CodecError::ArityMismatch { position, message },
            DiagnosticKind::TrailingGarbage => CodecError::TrailingGarbage { position, message },
            DiagnosticKind::IwMismatch
            | DiagnosticKind::MalformedBody
            | DiagnosticKind::BadEscape
            | DiagnosticKind::EmptyComponent => CodecError::MalformedBody { position, message },
        }
    }
}

fn check_spec(spec: &TaskSpec) -> Result<(), CodecError> {
    let v = spec.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(CodecError::InvalidSpec(v))
    }
}

/// `normalize(text)` followed by one `<label>` per candidate and the instruction word.
pub fn build_input(text: &str, spec: &TaskSpec) -> Result<SerializedInput, CodecError> {
    check_spec(spec)?;
    let text = normalize(text);
    if text.is_empty() {
        return Err(CodecError::EmptyText);
    }
    let mut out = text;
    out.push_str(&label_block(spec));
    out.push_str(&spec.instruction_word);
    Ok(SerializedInput(out))
}

fn label_block(spec: &TaskSpec) -> String {
    spec.labels().iter().map(|l| format!("<{l}>")).collect()
}

/// Recovers the normalized source text from an input built under `spec`.
pub fn input_text<'a>(input: &'a SerializedInput, spec: &TaskSpec) -> Option<&'a str> {
    let suffix = format!("{}{}", label_block(spec), spec.instruction_word);
    input.as_str().strip_suffix(suffix.as_str())
}

pub fn escape_component(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if is_reserved(c) || c == ESCAPE {
            out.push(ESCAPE);
        }
        out.push(c);
    }
    out
}

/// `<label>` + instruction word + body.
pub fn encode_output(
    label: &str,
    payload: &WordPayload,
    spec: &TaskSpec,
) -> Result<SerializedOutput, CodecError> {
    check_spec(spec)?;
    if !spec.has_label(label) {
        return Err(CodecError::LabelNotInSet(label.to_owned()));
    }
    let expected = spec.word_task.payload_kind();
    if payload.kind() != expected {
        return Err(CodecError::VariantMismatch {
            expected,
            found: payload.kind(),
        });
    }
    let mut out = format!("<{label}>{}", spec.instruction_word);
    let closed = expected != PayloadKind::Pairs;
    for (i, unit) in payload.units().iter().enumerate() {
        if unit.iter().any(|f| f.is_empty()) {
            return Err(CodecError::EmptyComponent { unit: i });
        }
        out.push(':');
        let fields: Vec<String> = unit.iter().map(|f| escape_component(f)).collect();
        out.push_str(&fields.join(";"));
        if closed {
            out.push(':');
        }
    }
    Ok(SerializedOutput(out))
}

/// Parses a raw model output.
///
/// Strict mode fails on the first problem. Tolerant mode never fails: it
/// keeps every well-formed unit and reports the rest as diagnostics.
pub fn parse_output(
    raw: &str,
    spec: &TaskSpec,
    mode: ParseMode,
) -> Result<ParseOutcome, CodecError> {
    let mut p = Parser {
        raw,
        spec,
        diagnostics: Vec::new(),
    };
    let (label, payload) = p.run();
    match mode {
        ParseMode::Strict => match p.diagnostics.into_iter().next() {
            Some(d) => Err(d.into()),
            None => Ok(ParseOutcome {
                label,
                payload,
                diagnostics: Vec::new(),
                mode_used: ParseMode::Strict,
            }),
        },
        ParseMode::Tolerant => Ok(ParseOutcome {
            label,
            payload,
            diagnostics: p.diagnostics,
            mode_used: ParseMode::Tolerant,
        }),
    }
}

pub fn parse_tolerant(raw: &str, spec: &TaskSpec) -> ParseOutcome {
    parse_output(raw, spec, ParseMode::Tolerant).expect("tolerant parsing is total")
}

pub fn parse_strict(raw: &str, spec: &TaskSpec) -> Result<ParseOutcome, CodecError> {
    parse_output(raw, spec, ParseMode::Strict)
}

/// Tolerant parse of arbitrary bytes (invalid UTF-8 is replaced, not rejected).
pub fn parse_bytes_tolerant(raw: &[u8], spec: &TaskSpec) -> ParseOutcome {
    parse_tolerant(&String::from_utf8_lossy(raw), spec)
}

struct Parser<'a> {
    raw: &'a str,
    spec: &'a TaskSpec,
    diagnostics: Vec<Diagnostic>,
}

/// A slice of the raw string plus its byte offset.
#[derive(Clone, Copy)]
struct Piece<'a> {
    at: usize,
    text: &'a str,
}

/// Splits on `sep` wherever it is not preceded by an escaping backslash.
fn split_unescaped(piece: Piece<'_>, sep: char) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut escaped = false;
    for (i, c) in piece.text.char_indices() {
        if escaped {
            escaped = false;
        } else if c == ESCAPE {
            escaped = true;
        } else if c == sep {
            out.push(Piece {
                at: piece.at + start,
                text: &piece.text[start..i],
            });
            start = i + c.len_utf8();
        }
    }
    out.push(Piece {
        at: piece.at + start,
        text: &piece.text[start..],
    });
    out
}

impl<'a> Parser<'a> {
    fn diag(&mut self, position: usize, kind: DiagnosticKind, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            position,
            kind,
            message: message.into(),
        });
    }

    fn run(&mut self) -> (Option<String>, WordPayload) {
        let (label, rest) = self.label();
        let body = self.instruction_word(rest);
        let payload = match body {
            Some(body) => self.body(body),
            None => WordPayload::empty(self.spec.word_task.payload_kind()),
        };
        (label, payload)
    }

    /// Returns the label and the byte offset where the remainder starts.
    fn label(&mut self) -> (Option<String>, usize) {
        let raw = self.raw;
        let Some(open) = raw.find('<') else {
            self.diag(0, DiagnosticKind::MissingLabel, "no `<label>` group");
            return (None, 0);
        };
        if open > 0 {
            self.diag(
                0,
                DiagnosticKind::MalformedLabel,
                "text before the label group",
            );
        }
        let Some(len) = raw[open + 1..].find('>') else {
            self.diag(open, DiagnosticKind::MissingLabel, "unclosed `<`");
            return (None, open + 1);
        };
        let close = open + 1 + len;
        let label = &raw[open + 1..close];
        if label.is_empty() {
            self.diag(open, DiagnosticKind::MalformedLabel, "empty label");
            return (None, close + 1);
        }
        if label.chars().any(|c| is_reserved(c) || c == ESCAPE) {
            self.diag(
                open + 1,
                DiagnosticKind::MalformedLabel,
                format!("label {label:?} contains a reserved character"),
            );
        } else if !self.spec.has_label(label) {
            self.diag(
                open + 1,
                DiagnosticKind::LabelNotInSet,
                format!("label {label:?} is not a candidate"),
            );
        }
        (Some(label.to_owned()), close + 1)
    }

    /// Checks the instruction-word echo; returns the body (starting at its
    /// first `:`), if any.
    fn instruction_word(&mut self, from: usize) -> Option<Piece<'a>> {
        let raw = self.raw;
        let rest = Piece {
            at: from,
            text: &raw[from..],
        };
        let mut parts = split_unescaped(rest, ':');
        let echo = parts.remove(0);
        if echo.text != self.spec.instruction_word {
            self.diag(
                echo.at,
                DiagnosticKind::IwMismatch,
                format!(
                    "expected instruction word {:?}, found {:?}",
                    self.spec.instruction_word, echo.text
                ),
            );
        }
        if parts.is_empty() {
            None
        } else {
            let at = echo.at + echo.text.len();
            Some(Piece {
                at,
                text: &raw[at..],
            })
        }
    }

    fn body(&mut self, body: Piece<'a>) -> WordPayload {
        let kind = self.spec.word_task.payload_kind();
        // Leading segment is the empty string before the body's first `:`.
        let segments: Vec<Piece<'_>> = split_unescaped(body, ':').into_iter().skip(1).collect();
        match kind {
            PayloadKind::Pairs => {
                let mut out = Vec::new();
                for seg in segments {
                    if seg.text.is_empty() {
                        self.diag(seg.at, DiagnosticKind::MalformedBody, "empty unit");
                        continue;
                    }
                    if let Some(mut f) = self.unit(seg, 2) {
                        let span = f.pop().unwrap_or_default();
                        let label = f.pop().unwrap_or_default();
                        out.push(LabelSpanPair { label, span });
                    }
                }
                WordPayload::Pairs(out)
            }
            PayloadKind::Triples | PayloadKind::Quads => {
                let arity = if kind == PayloadKind::Triples { 3 } else { 4 };
                let units = self.closed_units(&segments, arity);
                match kind {
                    PayloadKind::Triples => WordPayload::Triples(
                        units
                            .into_iter()
                            .map(|mut f| {
                                let subject = f.pop().unwrap_or_default();
                                let relation = f.pop().unwrap_or_default();
                                let object = f.pop().unwrap_or_default();
                                Triple {
                                    object,
                                    relation,
                                    subject,
                                }
                            })
                            .collect(),
                    ),
                    _ => WordPayload::Quads(
                        units
                            .into_iter()
                            .filter_map(|f| <[String; 4]>::try_from(f).ok())
                            .collect(),
                    ),
                }
            }
        }
    }

    /// Units wrapped in `:`. Between two units there is either one empty
    /// segment (`::`) or none (shared `:`); the final segment must be empty.
    fn closed_units(&mut self, segments: &[Piece<'_>], arity: usize) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        let n = segments.len();
        let mut prev_empty = true;
        for (i, seg) in segments.iter().enumerate() {
            let last = i + 1 == n;
            if seg.text.is_empty() {
                if last {
                    if n == 1 {
                        self.diag(seg.at, DiagnosticKind::MalformedBody, "body has no units");
                    }
                } else if prev_empty {
                    self.diag(seg.at, DiagnosticKind::MalformedBody, "empty unit");
                }
                prev_empty = true;
                continue;
            }
            prev_empty = false;
            if last {
                self.diag(
                    seg.at,
                    DiagnosticKind::TrailingGarbage,
                    "unit is not closed with `:`",
                );
                continue;
            }
            if let Some(f) = self.unit(*seg, arity) {
                out.push(f);
            }
        }
        out
    }

    /// Splits one unit into exactly `arity` unescaped, non-empty fields.
    fn unit(&mut self, seg: Piece<'_>, arity: usize) -> Option<Vec<String>> {
        let fields = split_unescaped(seg, ';');
        if fields.len() != arity {
            self.diag(
                seg.at,
                DiagnosticKind::ArityMismatch,
                format!("expected {arity} fields, found {}", fields.len()),
            );
            return None;
        }
        let mut out = Vec::with_capacity(arity);
        for f in fields {
            if f.text.is_empty() {
                self.diag(f.at, DiagnosticKind::EmptyComponent, "empty field");
                return None;
            }
            out.push(self.unescape(f)?);
        }
        Some(out)
    }

    fn unescape(&mut self, f: Piece<'_>) -> Option<String> {
        let mut out = String::with_capacity(f.text.len());
        let mut chars = f.text.char_indices();
        while let Some((i, c)) = chars.next() {
            if c == ESCAPE {
                match chars.next() {
                    Some((_, e)) if is_reserved(e) || e == ESCAPE => out.push(e),
                    Some((j, e)) => {
                        self.diag(
                            f.at + j,
                            DiagnosticKind::BadEscape,
                            format!("`\\{e}` is not an escape"),
                        );
                        return None;
                    }
                    None => {
                        self.diag(f.at + i, DiagnosticKind::BadEscape, "dangling `\\`");
                        return None;
                    }
                }
            } else if c == '<' || c == '>' {
                self.diag(
                    f.at + i,
                    DiagnosticKind::MalformedBody,
                    format!("unescaped `{c}` in body"),
                );
                return None;
            } else {
                out.push(c);
            }
        }
        Some(out)
    }
}
