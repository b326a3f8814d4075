//! JSON API for the validation UI.
//!
//! | method | path | body / query | response |
//! |---|---|---|---|
//! | GET | `/api/v1/progress` | | [`Progress`] |
//! | GET | `/api/v1/items/next` | `?annotator=` | [`NextItem`], or 204 when the queue is empty |
//! | GET | `/api/v1/groups/{id}/context` | `?radius=` (default 500) | [`ContextPayload`] |
//! | POST | `/api/v1/validations` | [`ValidationRecord`] | 201 [`Progress`] |
//! | GET | `/api/v1/alerts` | `?since=` | list of [`Alert`] |
//! | POST | `/api/v1/deferral` | [`DeferralRequest`] | [`DeferralPlan`] |
//! | GET | `/api/v1/export` | `?format=csv\|jsonl\|provenance` | export bytes |
//!
//! Errors are `{"error": <kind>, "message": <text>}`: 404 unknown group, 409
//! stale item or closed session, 422 invalid record, 500 storage failure.
//! Every mutation goes through one lock that also appends to the event log.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use elicit_core::corpus::{context_window, DEFAULT_CONTEXT_RADIUS};
use elicit_core::session::{Alert, DeferralPlan, Progress, SessionError};
use elicit_core::{Corpus, DeferralPolicy, SessionState, ValidationRecord};
use serde::{Deserialize, Serialize};

use crate::export::{render, ExportFormat};
use crate::store::{write_snapshot, EventLog, StoreError};

/// Events between automatic snapshots.
pub const SNAPSHOT_EVERY: usize = 100;

struct Session {
    state: SessionState,
    log: EventLog,
    since_snapshot: usize,
}

pub struct App {
    corpus: Corpus,
    session: Mutex<Session>,
}

impl App {
    pub fn new(corpus: Corpus, state: SessionState, log: EventLog) -> Arc<Self> {
        Arc::new(Self { corpus, session: Mutex::new(Session { state, log, since_snapshot: 0 }) })
    }

    fn lock(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Writes a snapshot of the current state next to the log.
    pub fn snapshot(&self) -> Result<(), StoreError> {
        let mut s = self.lock();
        write_snapshot(s.log.path(), &s.state)?;
        s.since_snapshot = 0;
        Ok(())
    }

    /// Applies `f` and appends whatever it logged.
    fn mutate<T>(&self, f: impl FnOnce(&mut SessionState) -> Result<T, SessionError>) -> Result<T, ApiError> {
        let mut guard = self.lock();
        let s = &mut *guard;
        let before = s.state.log.len();
        let out = f(&mut s.state)?;
        s.log.append_since(&s.state, before)?;
        s.since_snapshot += s.state.log.len() - before;
        if s.since_snapshot >= SNAPSHOT_EVERY {
            if let Err(e) = write_snapshot(s.log.path(), &s.state) {
                tracing::warn!("snapshot failed: {e}");
            }
            s.since_snapshot = 0;
        }
        Ok(out)
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, kind) = match e {
            SessionError::StaleItem { .. } => (StatusCode::CONFLICT, "stale_item"),
            SessionError::SessionClosed => (StatusCode::CONFLICT, "session_closed"),
            SessionError::NotOpened => (StatusCode::CONFLICT, "not_opened"),
            SessionError::InvalidRecord(_) | SessionError::InvalidEvent(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_record"),
        };
        Self { status, kind, message: e.to_string() }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        tracing::error!("event log write failed: {e}");
        Self { status: StatusCode::INTERNAL_SERVER_ERROR, kind: "storage", message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.kind, message: self.message })).into_response()
    }
}

fn not_found(message: String) -> ApiError {
    ApiError { status: StatusCode::NOT_FOUND, kind: "not_found", message }
}

#[derive(Debug, Deserialize)]
struct NextQuery {
    #[serde(default = "default_annotator")]
    annotator: String,
}

fn default_annotator() -> String {
    "anonymous".into()
}

#[derive(Debug, Deserialize)]
struct ContextQuery {
    #[serde(default = "default_radius")]
    radius: usize,
}

fn default_radius() -> usize {
    DEFAULT_CONTEXT_RADIUS
}

/// A highlighted range, in characters relative to the excerpt text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub start: usize,
    pub end: usize,
    pub lf_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextPayload {
    pub group_id: String,
    pub doc_id: String,
    pub value: String,
    /// Excerpt text and its span in the document.
    pub excerpt: elicit_core::corpus::Excerpt,
    pub highlights: Vec<Highlight>,
}

#[derive(Debug, Deserialize)]
struct AlertQuery {
    #[serde(default)]
    since: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeferralRequest {
    pub policy: DeferralPolicy,
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: ExportFormat,
}

async fn progress(State(app): State<Arc<App>>) -> Json<Progress> {
    Json(app.lock().state.progress())
}

async fn next_item(State(app): State<Arc<App>>, Query(q): Query<NextQuery>) -> Result<Response, ApiError> {
    let item = app.lock().state.next_item(&app.corpus, &q.annotator)?;
    Ok(match item {
        Some(item) => Json(item).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn group_context(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    Query(q): Query<ContextQuery>,
) -> Result<Json<ContextPayload>, ApiError> {
    let group = app.lock().state.groups.get(&id).cloned().ok_or_else(|| not_found(format!("unknown group {id}")))?;
    let doc = app.corpus.get(&group.doc_id).ok_or_else(|| not_found(format!("unknown document {}", group.doc_id)))?;
    let excerpt = context_window(doc, &group.merged_span, q.radius).map_err(|e| not_found(e.to_string()))?;
    let mut by_span: std::collections::BTreeMap<(usize, usize), Vec<String>> = Default::default();
    for m in &group.members {
        let lfs = by_span.entry((m.span.start, m.span.end)).or_default();
        if !lfs.contains(&m.lf_id) {
            lfs.push(m.lf_id.clone());
        }
    }
    let highlights = by_span
        .into_iter()
        .map(|((s, e), mut lf_ids)| {
            lf_ids.sort();
            Highlight { start: s - excerpt.span.start, end: e - excerpt.span.start, lf_ids }
        })
        .collect();
    Ok(Json(ContextPayload { group_id: group.group_id, doc_id: group.doc_id, value: group.value, excerpt, highlights }))
}

async fn submit(State(app): State<Arc<App>>, Json(record): Json<ValidationRecord>) -> Result<(StatusCode, Json<Progress>), ApiError> {
    let progress = app.mutate(|s| {
        s.submit_validation(record)?;
        Ok(s.progress())
    })?;
    Ok((StatusCode::CREATED, Json(progress)))
}

async fn alerts(State(app): State<Arc<App>>, Query(q): Query<AlertQuery>) -> Json<Vec<Alert>> {
    Json(app.lock().state.alerts.iter().skip(q.since).cloned().collect())
}

async fn deferral(State(app): State<Arc<App>>, Json(req): Json<DeferralRequest>) -> Result<Json<DeferralPlan>, ApiError> {
    Ok(Json(app.mutate(|s| s.plan_deferral(req.policy))?))
}

async fn export(State(app): State<Arc<App>>, Query(q): Query<ExportQuery>) -> Response {
    let body = render(&app.lock().state, q.format);
    ([(header::CONTENT_TYPE, q.format.content_type())], body).into_response()
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/api/v1/progress", get(progress))
        .route("/api/v1/items/next", get(next_item))
        .route("/api/v1/groups/{id}/context", get(group_context))
        .route("/api/v1/validations", post(submit))
        .route("/api/v1/alerts", get(alerts))
        .route("/api/v1/deferral", post(deferral))
        .route("/api/v1/export", get(export))
        .with_state(app)
}

/// Serves until Ctrl-C, then snapshots the state.
pub async fn serve(addr: SocketAddr, app: Arc<App>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Err(e) = app.snapshot() {
        tracing::warn!("final snapshot failed: {e}");
    }
    Ok(())
}
