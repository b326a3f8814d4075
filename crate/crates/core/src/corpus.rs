//! Documents, chat segmentation and context windows.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::text::{self, is_sentence_terminator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    LongDocument,
    ChatInstance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sender {
    Offender,
    Decoy,
}

impl fmt::Display for Sender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sender::Offender => "offender",
            Sender::Decoy => "decoy",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatMessage {
    pub sender: Sender,
    /// Seconds since the epoch.
    pub timestamp: u64,
    pub text: String,
}

/// Character span `[start, end)` inside one document.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(doc_id: impl Into<String>, start: usize, end: usize) -> Self {
        Self { doc_id: doc_id.into(), start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.doc_id == other.doc_id && self.start <= other.start && other.end <= self.end
    }

    /// Character overlap length with `other` (0 for different documents).
    pub fn intersection_len(&self, other: &Span) -> usize {
        if self.doc_id != other.doc_id {
            return 0;
        }
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    /// Jaccard overlap of the two character sets.
    pub fn jaccard(&self, other: &Span) -> f64 {
        let inter = self.intersection_len(other);
        let union = self.len() + other.len() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Character range of one chat message inside a chat-instance document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageSpan {
    pub sender: Sender,
    pub timestamp: u64,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub char_count: usize,
    pub source_kind: SourceKind,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    /// Per-message spans, only for chat instances.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub messages: Vec<MessageSpan>,
}

impl Document {
    /// Builds a document, normalizing newlines and counting characters.
    pub fn new(doc_id: impl Into<String>, text: &str, source_kind: SourceKind) -> Self {
        let text = text::normalize_newlines(text);
        Self {
            doc_id: doc_id.into(),
            char_count: text.chars().count(),
            text,
            source_kind,
            metadata: BTreeMap::new(),
            messages: Vec::new(),
        }
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    /// Span covering the whole document.
    pub fn full_span(&self) -> Span {
        Span::new(self.doc_id.clone(), 0, self.char_count)
    }

    pub fn check_span(&self, span: &Span) -> Result<(), CorpusError> {
        if span.doc_id != self.doc_id || span.start >= span.end || span.end > self.char_count {
            return Err(CorpusError::InvalidSpan {
                doc_id: span.doc_id.clone(),
                start: span.start,
                end: span.end,
            });
        }
        Ok(())
    }

    /// Text of `span`; the span must belong to this document.
    pub fn span_text(&self, span: &Span) -> &str {
        text::char_slice(&self.text, span.start, span.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("invalid span [{start}, {end}) for document {doc_id}")]
    InvalidSpan { doc_id: String, start: usize, end: usize },
    #[error("duplicate document id {0}")]
    DuplicateDocument(String),
    #[error("messages are not sorted by timestamp at index {index}")]
    UnsortedInput { index: usize },
    #[error("message {index} has empty text")]
    EmptyMessage { index: usize },
}

/// An immutable, ordered collection of documents with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    docs: Vec<Document>,
    index: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_documents(docs: impl IntoIterator<Item = Document>) -> Result<Self, CorpusError> {
        let mut corpus = Self::new();
        for doc in docs {
            corpus.push(doc)?;
        }
        Ok(corpus)
    }

    pub fn push(&mut self, doc: Document) -> Result<(), CorpusError> {
        if self.index.contains_key(&doc.doc_id) {
            return Err(CorpusError::DuplicateDocument(doc.doc_id));
        }
        self.index.insert(doc.doc_id.clone(), self.docs.len());
        self.docs.push(doc);
        Ok(())
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.index.get(doc_id).map(|&i| &self.docs[i])
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn doc_ids(&self) -> Vec<String> {
        self.docs.iter().map(|d| d.doc_id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn context_window(&self, span: &Span, radius: usize) -> Result<Excerpt, CorpusError> {
        let doc = self
            .get(&span.doc_id)
            .ok_or_else(|| CorpusError::UnknownDocument(span.doc_id.clone()))?;
        context_window(doc, span, radius)
    }
}

/// Splits time-ordered chat messages into conversational instances.
///
/// A new instance starts whenever the gap to the previous message is strictly
/// greater than `gap_seconds`. Instance ids are `{base_id}-{n}` (1-based,
/// zero-padded to three digits) and each line of text is `sender: body`.
pub fn segment_chat_instances(
    base_id: &str,
    messages: &[ChatMessage],
    gap_seconds: u64,
) -> Result<Vec<Document>, CorpusError> {
    for (i, m) in messages.iter().enumerate() {
        if m.text.trim().is_empty() {
            return Err(CorpusError::EmptyMessage { index: i });
        }
        if i > 0 && m.timestamp < messages[i - 1].timestamp {
            return Err(CorpusError::UnsortedInput { index: i });
        }
    }

    let mut runs: Vec<&[ChatMessage]> = Vec::new();
    let mut start = 0;
    for i in 1..messages.len() {
        if messages[i].timestamp - messages[i - 1].timestamp > gap_seconds {
            runs.push(&messages[start..i]);
            start = i;
        }
    }
    if !messages.is_empty() {
        runs.push(&messages[start..]);
    }

    Ok(runs
        .into_iter()
        .enumerate()
        .map(|(n, run)| chat_instance(&format!("{base_id}-{:03}", n + 1), run))
        .collect())
}

fn chat_instance(doc_id: &str, run: &[ChatMessage]) -> Document {
    let mut body = String::new();
    let mut spans = Vec::with_capacity(run.len());
    let mut offset = 0;
    for m in run {
        let line = format!("{}: {}", m.sender, text::normalize_newlines(m.text.trim()).replace('\n', " "));
        let len = line.chars().count();
        spans.push(MessageSpan { sender: m.sender, timestamp: m.timestamp, start: offset, end: offset + len });
        body.push_str(&line);
        body.push('\n');
        offset += len + 1;
    }
    let mut doc = Document::new(doc_id, &body, SourceKind::ChatInstance)
        .with_metadata("start_timestamp", run[0].timestamp.to_string())
        .with_metadata("end_timestamp", run[run.len() - 1].timestamp.to_string())
        .with_metadata("message_count", run.len().to_string());
    doc.messages = spans;
    doc
}

/// A slice of a document shown around an explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Excerpt {
    pub text: String,
    pub span: Span,
}

/// Maximum distance a window edge moves outward to reach a sentence boundary.
pub const SENTENCE_SNAP_CHARS: usize = 100;

/// Default context radius in characters.
pub const DEFAULT_CONTEXT_RADIUS: usize = 500;

/// Text around `span`: `radius` characters on either side, clamped to the
/// document and widened to whole sentences when a terminator lies within
/// [`SENTENCE_SNAP_CHARS`] of a cut. A zero radius returns the span itself.
pub fn context_window(doc: &Document, span: &Span, radius: usize) -> Result<Excerpt, CorpusError> {
    doc.check_span(span)?;
    let len = doc.char_count;
    let mut lo = span.start.saturating_sub(radius);
    let mut hi = (span.end + radius).min(len);

    if radius > 0 {
        let chars: Vec<char> = doc.text.chars().collect();
        if lo > 0 {
            let floor = lo.saturating_sub(SENTENCE_SNAP_CHARS);
            if let Some(p) = (floor..lo).rev().find(|&p| is_sentence_terminator(chars[p])) {
                lo = p + 1;
                while lo < span.start && chars[lo].is_whitespace() {
                    lo += 1;
                }
            }
        }
        if hi < len && !is_sentence_terminator(chars[hi - 1]) {
            let ceil = (hi + SENTENCE_SNAP_CHARS).min(len);
            if let Some(p) = (hi..ceil).find(|&p| is_sentence_terminator(chars[p])) {
                hi = if chars[p] == '\n' { p } else { p + 1 };
            }
        }
    }

    let span = Span::new(doc.doc_id.clone(), lo, hi);
    Ok(Excerpt { text: doc.span_text(&span).to_string(), span })
}
