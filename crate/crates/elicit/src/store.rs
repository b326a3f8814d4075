//! On-disk artifacts: candidate and group JSONL, fit JSON and the session
//! event log.
//!
//! The event log starts with a header line `{"elicit_event_log":1}` and
//! holds one [`SessionEvent`] per line after it. It is only ever appended
//! to. A snapshot (`<log>.snapshot.json`) caches the state after a prefix of
//! the log and is ignored when it does not match.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use elicit_core::labelmodel::FIT_FORMAT_VERSION;
use elicit_core::pipeline::VariableFit;
use elicit_core::session::{SessionEvent, EVENT_LOG_VERSION};
use elicit_core::text::fnv1a64;
use elicit_core::{Candidate, ExplanationGroup, SessionState};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    /// The file cannot be read back; `offset` is the byte offset of the bad line.
    #[error("{}: corrupt at line {line} (byte offset {offset}): {message}", path.display())]
    CorruptState { path: PathBuf, line: usize, offset: u64, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_owned(), source }
}

/// Reads a JSONL file, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    let mut offset = 0u64;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            let v = serde_json::from_str(&line).map_err(|e| StoreError::CorruptState {
                path: path.to_owned(),
                line: i + 1,
                offset,
                message: e.to_string(),
            })?;
            out.push(v);
        }
        offset += line.len() as u64 + 1;
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), StoreError> {
    fs::write(path, to_jsonl(items)).map_err(io_err(path))
}

pub fn read_candidates(path: &Path) -> Result<Vec<Candidate>, StoreError> {
    read_jsonl(path)
}

/// Output of `fit`: scored groups plus one fit per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub format_version: u32,
    /// Content hash of the fits and groups; recorded in the session log.
    pub fit_version: u64,
    pub alpha: f64,
    pub validated: usize,
    pub fits: Vec<VariableFit>,
    pub groups: Vec<ExplanationGroup>,
}

impl FitArtifact {
    pub fn new(alpha: f64, validated: usize, fits: Vec<VariableFit>, groups: Vec<ExplanationGroup>) -> Self {
        let body = serde_json::to_string(&(&fits, &groups)).expect("serializable");
        let fit_version = fnv1a64([body.as_bytes()]);
        Self { format_version: FIT_FORMAT_VERSION, fit_version, alpha, validated, fits, groups }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| StoreError::CorruptState {
        path: path.to_owned(),
        line: e.line(),
        offset: 0,
        message: e.to_string(),
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogHeader {
    elicit_event_log: u32,
}

/// An append-only session log bound to a file.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    /// Creates a new log holding `events`; fails if the file exists.
    pub fn create(path: &Path, events: &[SessionEvent]) -> Result<Self, StoreError> {
        let mut file = OpenOptions::new().create_new(true).append(true).open(path).map_err(io_err(path))?;
        let mut text = serde_json::to_string(&LogHeader { elicit_event_log: EVENT_LOG_VERSION }).expect("serializable");
        text.push('\n');
        text.push_str(&to_jsonl(events));
        file.write_all(text.as_bytes()).map_err(io_err(path))?;
        file.sync_data().map_err(io_err(path))?;
        Ok(Self { path: path.to_owned(), file })
    }

    /// Opens an existing log and rebuilds its state.
    pub fn open(path: &Path) -> Result<(Self, SessionState), StoreError> {
        let state = load_state(path)?;
        let file = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
        Ok((Self { path: path.to_owned(), file }, state))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, events: &[SessionEvent]) -> Result<(), StoreError> {
        if events.is_empty() {
            return Ok(());
        }
        self.file.write_all(to_jsonl(events).as_bytes()).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }

    /// Appends whatever `state` logged beyond `before` events.
    pub fn append_since(&mut self, state: &SessionState, before: usize) -> Result<(), StoreError> {
        self.append(&state.log[before..])
    }
}

/// Reads every event of a log file.
pub fn read_events(path: &Path) -> Result<Vec<SessionEvent>, StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    let corrupt = |line: usize, offset: u64, message: String| StoreError::CorruptState { path: path.to_owned(), line, offset, message };
    let mut events = Vec::new();
    let mut offset = 0u64;
    let mut header = false;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let here = offset;
        offset += line.len() as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        if !header {
            let h: LogHeader = serde_json::from_str(&line).map_err(|e| corrupt(i + 1, here, format!("bad header: {e}")))?;
            if h.elicit_event_log != EVENT_LOG_VERSION {
                return Err(corrupt(i + 1, here, format!("unsupported log version {}", h.elicit_event_log)));
            }
            header = true;
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| corrupt(i + 1, here, e.to_string()))?);
    }
    if !header {
        return Err(corrupt(1, 0, "missing header".into()));
    }
    Ok(events)
}

pub fn snapshot_path(log: &Path) -> PathBuf {
    let mut name = log.as_os_str().to_owned();
    name.push(".snapshot.json");
    PathBuf::from(name)
}

/// Rebuilds the state of a log, starting from its snapshot when the
/// snapshot's history is a prefix of the log.
pub fn load_state(path: &Path) -> Result<SessionState, StoreError> {
    let events = read_events(path)?;
    let snap = snapshot_path(path);
    let mut state = match read_json::<SessionState>(&snap) {
        Ok(s) if s.log.len() <= events.len() && s.log[..] == events[..s.log.len()] => s,
        Ok(_) => {
            tracing::warn!(snapshot = %snap.display(), "snapshot does not match the log; replaying from scratch");
            SessionState::default()
        }
        Err(_) => SessionState::default(),
    };
    let skip = state.log.len();
    for (i, event) in events.into_iter().enumerate().skip(skip) {
        state.apply(event).map_err(|e| StoreError::CorruptState {
            path: path.to_owned(),
            line: i + 2,
            offset: 0,
            message: e.to_string(),
        })?;
    }
    Ok(state)
}

pub fn write_snapshot(log: &Path, state: &SessionState) -> Result<(), StoreError> {
    let snap = snapshot_path(log);
    let tmp = snap.with_extension("tmp");
    fs::write(&tmp, serde_json::to_vec(state).expect("serializable")).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &snap).map_err(io_err(&snap))
}
