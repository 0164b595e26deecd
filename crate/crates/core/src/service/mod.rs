//! Session-based HTTP API over loaded datasets.
//!
//! Datasets are parsed once and shared immutably. Each session owns a
//! [`ViewChain`] and its derived [`View`]; step mutations are serialized per
//! session while tile, image and meta reads work on an `Arc` snapshot of the
//! current view. Every mutation bumps the session's version, which tile
//! requests may pin with `version=` to detect interleaved changes.

mod handlers;
mod meta;

use std::collections::HashMap;
use std::future::Future;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::extract::DefaultBodyLimit;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::Serialize;
use tokio::net::TcpListener;

use crate::ingest::{DatasetSummary, IngestError};
use crate::render::RenderError;
use crate::tile::TileError;
use crate::transform::{ChainError, LogEntry, Step, StepReport, TransformError, View, ViewChain};
use crate::Dataset;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Datasets loaded by path must resolve inside this directory.
    pub data_root: PathBuf,
    /// Sessions idle for longer than this are dropped.
    pub session_ttl: Duration,
    /// Largest accepted request body in bytes.
    pub max_upload: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            data_root: PathBuf::from("."),
            session_ttl: Duration::from_secs(3600),
            max_upload: 256 << 20,
        }
    }
}

/// Error payload `{"error": kind, "message": text}` with an HTTP status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub kind: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError { status, kind: kind.into(), message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "InvalidRequest", message)
    }

    fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("unknown {what} {id:?}"))
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: &self.kind, message: &self.message })).into_response()
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let status = match e {
            IngestError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.kind(), e.to_string())
    }
}

impl From<TransformError> for ApiError {
    fn from(e: TransformError) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, e.kind(), e.to_string())
    }
}

impl From<ChainError> for ApiError {
    fn from(e: ChainError) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, e.source.kind(), e.to_string())
    }
}

impl From<RenderError> for ApiError {
    fn from(e: RenderError) -> Self {
        let status = match e {
            RenderError::OutOfRange(_) => StatusCode::RANGE_NOT_SATISFIABLE,
            RenderError::UnknownReference(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.kind(), e.to_string())
    }
}

impl From<TileError> for ApiError {
    fn from(e: TileError) -> Self {
        let status = match e {
            TileError::OutOfRange(_) => StatusCode::RANGE_NOT_SATISFIABLE,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, "TileError", e.to_string())
    }
}

pub(crate) struct LoadedDataset {
    pub dataset: Arc<Dataset>,
    pub summary: DatasetSummary,
}

struct SessionState {
    chain: ViewChain,
    view: Arc<View>,
    version: u64,
}

pub(crate) struct Session {
    pub dataset_id: String,
    pub dataset: Arc<Dataset>,
    state: RwLock<SessionState>,
    last_used: Mutex<Instant>,
}

/// Consistent read of a session's derived state.
pub(crate) struct Snapshot {
    pub view: Arc<View>,
    pub version: u64,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl Session {
    fn new(dataset_id: String, dataset: Arc<Dataset>, chain: ViewChain) -> Result<Session, ChainError> {
        let (view, _) = chain.derive(&dataset)?;
        Ok(Session {
            dataset_id,
            dataset,
            state: RwLock::new(SessionState { chain, view: Arc::new(view), version: 0 }),
            last_used: Mutex::new(Instant::now()),
        })
    }

    fn touch(&self) {
        *self.last_used.lock().unwrap() = Instant::now();
    }

    fn idle_for(&self, now: Instant) -> Duration {
        now.saturating_duration_since(*self.last_used.lock().unwrap())
    }

    pub fn snapshot(&self) -> Snapshot {
        let state = self.state.read().unwrap();
        Snapshot { view: Arc::clone(&state.view), version: state.version }
    }

    pub fn log(&self) -> ViewChain {
        self.state.read().unwrap().chain.clone()
    }

    /// Apply one step on top of the current view and record it.
    pub fn apply(&self, step: Step) -> Result<(Snapshot, StepReport), TransformError> {
        let mut state = self.state.write().unwrap();
        let mut view = (*state.view).clone();
        let report = view.apply(&self.dataset, &step)?;
        state.chain.steps.push(LogEntry { step, at_ms: Some(now_ms()) });
        state.view = Arc::new(view);
        state.version += 1;
        Ok((Snapshot { view: Arc::clone(&state.view), version: state.version }, report))
    }

    /// Drop the last step and re-derive the view. `None` when the log is empty.
    pub fn undo(&self) -> Option<Snapshot> {
        let mut state = self.state.write().unwrap();
        state.chain.steps.pop()?;
        let (view, _) = state.chain.derive(&self.dataset).expect("a prefix of a valid chain replays");
        state.view = Arc::new(view);
        state.version += 1;
        Some(Snapshot { view: Arc::clone(&state.view), version: state.version })
    }
}

/// Shared service state. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    /// Canonical form of `config.data_root`, if it exists.
    root: Option<PathBuf>,
    datasets: RwLock<HashMap<String, Arc<LoadedDataset>>>,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        let root = config.data_root.canonicalize().ok();
        AppState {
            inner: Arc::new(Inner {
                config,
                root,
                datasets: RwLock::new(HashMap::new()),
                sessions: RwLock::new(HashMap::new()),
            }),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    /// Register an already parsed dataset, returning its id.
    pub fn insert_dataset(&self, dataset: Dataset, summary: DatasetSummary) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let loaded = Arc::new(LoadedDataset { dataset: Arc::new(dataset), summary });
        self.inner.datasets.write().unwrap().insert(id.clone(), loaded);
        id
    }

    pub(crate) fn dataset(&self, id: &str) -> Result<Arc<LoadedDataset>, ApiError> {
        self.inner.datasets.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found("dataset", id))
    }

    pub(crate) fn create_session(&self, dataset_id: &str, chain: ViewChain) -> Result<String, ApiError> {
        let loaded = self.dataset(dataset_id)?;
        let session = Session::new(dataset_id.to_string(), Arc::clone(&loaded.dataset), chain)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.inner.sessions.write().unwrap().insert(id.clone(), Arc::new(session));
        Ok(id)
    }

    pub(crate) fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        let session = self.inner.sessions.read().unwrap().get(id).cloned();
        match session {
            Some(s) if s.idle_for(Instant::now()) <= self.inner.config.session_ttl => {
                s.touch();
                Ok(s)
            }
            Some(_) => {
                self.inner.sessions.write().unwrap().remove(id);
                Err(ApiError::not_found("session", id))
            }
            None => Err(ApiError::not_found("session", id)),
        }
    }

    /// Drop sessions idle for longer than the TTL. Returns how many went.
    pub fn sweep_expired(&self) -> usize {
        let now = Instant::now();
        let ttl = self.inner.config.session_ttl;
        let mut sessions = self.inner.sessions.write().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| s.idle_for(now) <= ttl);
        before - sessions.len()
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().unwrap().len()
    }

    /// Resolve a client-supplied relative path inside the data root.
    /// Absolute paths and `..` escapes are refused with 403, missing files
    /// give 404.
    pub(crate) fn resolve_path(&self, relative: &str) -> Result<PathBuf, ApiError> {
        let forbidden = || ApiError::new(StatusCode::FORBIDDEN, "PathEscape", format!("{relative:?} is outside the data root"));
        let root = self.inner.root.as_ref().ok_or_else(|| {
            ApiError::new(StatusCode::NOT_FOUND, "NotFound", "data root does not exist")
        })?;
        let mut depth = 0usize;
        for component in Path::new(relative).components() {
            match component {
                Component::Normal(_) => depth += 1,
                Component::CurDir => {}
                Component::ParentDir => depth = depth.checked_sub(1).ok_or_else(forbidden)?,
                Component::RootDir | Component::Prefix(_) => return Err(forbidden()),
            }
        }
        let canonical = root
            .join(relative)
            .canonicalize()
            .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("no such file {relative:?}")))?;
        if !canonical.starts_with(root) {
            return Err(forbidden());
        }
        Ok(canonical)
    }
}

pub fn router(state: AppState) -> Router {
    let limit = state.config().max_upload;
    Router::new()
        .route("/datasets", post(handlers::create_dataset))
        .route("/datasets/{id}", get(handlers::get_dataset))
        .route("/sessions", post(handlers::create_session))
        .route("/sessions/{id}", get(handlers::get_session))
        .route("/sessions/{id}/steps", post(handlers::apply_step))
        .route("/sessions/{id}/steps/last", delete(handlers::undo_step))
        .route("/sessions/{id}/tile", get(handlers::get_tile))
        .route("/sessions/{id}/overview", get(handlers::get_overview))
        .route("/sessions/{id}/export", get(handlers::get_export))
        .route("/sessions/{id}/meta", get(handlers::get_meta))
        .route("/sessions/{id}/log", get(handlers::get_log))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Serve until `shutdown` resolves, sweeping idle sessions in the background.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let sweeper = {
        let state = state.clone();
        let period = (state.config().session_ttl / 4).max(Duration::from_secs(1));
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                let dropped = state.sweep_expired();
                if dropped > 0 {
                    tracing::info!(dropped, "expired idle sessions");
                }
            }
        })
    };
    let result = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await;
    sweeper.abort();
    result
}
