//! Reading documents from disk.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use elicit_core::corpus::{segment_chat_instances, CorpusError};
use elicit_core::{ChatMessage, Corpus, Document, SourceKind};
use serde::Deserialize;
use serde_json::Value;

/// Gap in seconds above which a chat log starts a new instance.
pub const CHAT_GAP_SECONDS: u64 = 3600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InputFormat {
    /// A directory of `*.txt` files, one document each.
    TextDir,
    /// JSONL, one `{id, text, ...}` document per line.
    Jsonl,
    /// JSONL, one `{sender, timestamp, text}` chat message per line.
    Chat,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_owned(), source }
}

/// Guesses the format: directories are text dirs, `.jsonl` files whose first
/// record has a `sender` field are chats, other files are document JSONL.
pub fn detect_format(path: &Path) -> Result<InputFormat, IngestError> {
    if path.is_dir() {
        return Ok(InputFormat::TextDir);
    }
    let file = fs::File::open(path).map_err(io(path))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let chat = serde_json::from_str::<Value>(&line).is_ok_and(|v| v.get("sender").is_some());
        return Ok(if chat { InputFormat::Chat } else { InputFormat::Jsonl });
    }
    Ok(InputFormat::Jsonl)
}

pub fn ingest(path: &Path, format: InputFormat) -> Result<Corpus, IngestError> {
    match format {
        InputFormat::TextDir => ingest_text_dir(path),
        InputFormat::Jsonl => {
            let f = fs::File::open(path).map_err(io(path))?;
            read_documents_jsonl(f)
        }
        InputFormat::Chat => {
            let f = fs::File::open(path).map_err(io(path))?;
            let base = path.file_stem().and_then(|s| s.to_str()).unwrap_or("chat");
            read_chat_jsonl(f, base, CHAT_GAP_SECONDS)
        }
    }
}

/// One document per `*.txt` file, sorted by file name; the id is the stem.
pub fn ingest_text_dir(dir: &Path) -> Result<Corpus, IngestError> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let p = entry.map_err(io(dir))?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "txt") {
            paths.push(p);
        }
    }
    paths.sort();
    let mut corpus = Corpus::new();
    for p in paths {
        let text = fs::read_to_string(&p).map_err(io(&p))?;
        let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        corpus.push(Document::new(id, &text, SourceKind::LongDocument))?;
    }
    Ok(corpus)
}

fn lines(reader: impl Read) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    BufReader::new(reader).lines().enumerate().map(|(i, l)| (i + 1, l))
}

fn format_err(line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Format { line, message: message.into() }
}

/// Documents from JSONL. Fields other than `id` and `text` become metadata;
/// a previously ingested [`Document`] line is read back unchanged.
pub fn read_documents_jsonl(reader: impl Read) -> Result<Corpus, IngestError> {
    let mut corpus = Corpus::new();
    for (n, line) in lines(reader) {
        let line = line.map_err(|e| format_err(n, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| format_err(n, e.to_string()))?;
        if value.get("doc_id").is_some() {
            let doc: Document = serde_json::from_value(value).map_err(|e| format_err(n, e.to_string()))?;
            corpus.push(doc)?;
            continue;
        }
        let Value::Object(mut fields) = value else { return Err(format_err(n, "expected an object")) };
        let Some(Value::String(text)) = fields.remove("text") else {
            return Err(format_err(n, "missing string field \"text\""));
        };
        let id = match fields.remove("id") {
            Some(Value::String(s)) => s,
            Some(Value::Number(x)) => x.to_string(),
            Some(_) => return Err(format_err(n, "\"id\" must be a string or number")),
            None => return Err(format_err(n, "missing field \"id\"")),
        };
        let mut doc = Document::new(id, &text, SourceKind::LongDocument);
        let flat: BTreeMap<String, String> = fields
            .into_iter()
            .map(|(k, v)| match v {
                Value::String(s) => (k, s),
                other => (k, other.to_string()),
            })
            .collect();
        doc.metadata = flat;
        corpus.push(doc)?;
    }
    Ok(corpus)
}

#[derive(Deserialize)]
struct ChatLine {
    #[serde(flatten)]
    message: ChatMessage,
    #[serde(default)]
    conversation: Option<String>,
}

/// Chat messages from JSONL, segmented into instances. Messages carrying a
/// `conversation` field are grouped per conversation (in first-seen
/// order); the rest share `base_id`.
pub fn read_chat_jsonl(reader: impl Read, base_id: &str, gap_seconds: u64) -> Result<Corpus, IngestError> {
    let mut order: Vec<String> = Vec::new();
    let mut convs: BTreeMap<String, Vec<ChatMessage>> = BTreeMap::new();
    for (n, line) in lines(reader) {
        let line = line.map_err(|e| format_err(n, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ChatLine = serde_json::from_str(&line).map_err(|e| format_err(n, e.to_string()))?;
        let conv = parsed.conversation.unwrap_or_else(|| base_id.to_string());
        if !convs.contains_key(&conv) {
            order.push(conv.clone());
        }
        convs.entry(conv).or_default().push(parsed.message);
    }
    let mut corpus = Corpus::new();
    for conv in order {
        for doc in segment_chat_instances(&conv, &convs[&conv], gap_seconds)? {
            corpus.push(doc)?;
        }
    }
    Ok(corpus)
}

/// Writes the corpus as JSONL of [`Document`]s, readable by
/// [`read_documents_jsonl`].
pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<(), IngestError> {
    let mut out = String::new();
    for d in corpus.documents() {
        out.push_str(&serde_json::to_string(d).expect("documents serialize"));
        out.push('\n');
    }
    fs::write(path, out).map_err(io(path))
}
