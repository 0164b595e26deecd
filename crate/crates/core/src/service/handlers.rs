use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Cursor};
use std::ops::Range;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use super::{ApiError, AppState, Snapshot};
use crate::dataset::AttachReport;
use crate::ingest::{parse_impute2, parse_vcf, table_name, DatasetSummary, InputFormat};
use crate::meta::{parse_meta, MetaKind};
use crate::render::{export_image, encode_png, render_overview, ImageFormat, Region, RenderOptions};
use crate::tile::Tile;
use crate::transform::{LogEntry, ViewChain};

type Params = Query<HashMap<String, String>>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(t)| t).map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
}

/// A text input given either as a path under the data root or inline.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TextSource {
    pub path: Option<String>,
    pub content: Option<String>,
    /// Table name for meta files; defaults to the file stem.
    pub name: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LoadRequest {
    pub format: InputFormat,
    pub path: Option<String>,
    pub content: Option<String>,
    pub sample_path: Option<String>,
    pub sample_content: Option<String>,
    #[serde(default)]
    pub subject_meta: Vec<TextSource>,
    #[serde(default)]
    pub variant_meta: Vec<TextSource>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LoadResponse {
    dataset_id: String,
    summary: DatasetSummary,
    attached: Vec<AttachReport>,
}

fn open(state: &AppState, what: &str, path: Option<String>, content: Option<String>) -> Result<Box<dyn BufRead + Send>, ApiError> {
    match (path, content) {
        (Some(p), None) => {
            let resolved = state.resolve_path(&p)?;
            let file = File::open(&resolved).map_err(|e| ApiError::new(StatusCode::NOT_FOUND, "NotFound", format!("{p:?}: {e}")))?;
            Ok(Box::new(BufReader::with_capacity(1 << 16, file)))
        }
        (None, Some(c)) => Ok(Box::new(Cursor::new(c.into_bytes()))),
        _ => Err(ApiError::bad_request(format!("{what}: give exactly one of path or content"))),
    }
}

pub(super) async fn create_dataset(
    State(state): State<AppState>,
    payload: Result<Json<LoadRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    let worker = state.clone();
    let (id, summary, attached) = blocking(move || {
        let main = open(&worker, "dataset", req.path, req.content)?;
        let mut parsed = match req.format {
            InputFormat::Vcf => parse_vcf(main)?,
            InputFormat::Impute2 => {
                let samples = open(&worker, "samples", req.sample_path, req.sample_content)?;
                parse_impute2(main, samples)?
            }
        };
        let mut attached = Vec::new();
        for (axis, sources) in [(MetaKind::Subject, req.subject_meta), (MetaKind::Variant, req.variant_meta)] {
            for (i, src) in sources.into_iter().enumerate() {
                let name = match (&src.name, &src.path) {
                    (Some(n), _) => n.clone(),
                    (None, Some(p)) => table_name(std::path::Path::new(p)),
                    (None, None) => format!("{}{}", if axis == MetaKind::Subject { "subjects" } else { "variants" }, i + 1),
                };
                let reader = open(&worker, "meta", src.path, src.content)?;
                let table = parse_meta(reader, axis, &name)?;
                attached.push(parsed.dataset.attach_meta(axis, table)?);
            }
        }
        let summary = parsed.summary();
        let id = worker.insert_dataset(parsed.dataset, summary.clone());
        Ok((id, summary, attached))
    })
    .await?;
    tracing::info!(dataset = %id, subjects = summary.n_subjects, variants = summary.n_variants, "dataset loaded");
    Ok((StatusCode::CREATED, Json(LoadResponse { dataset_id: id, summary, attached })).into_response())
}

pub(super) async fn get_dataset(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let loaded = state.dataset(&id)?;
    Ok(Json(&loaded.summary).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionRequest {
    pub dataset_id: String,
    /// Optional log to replay into the new session.
    #[serde(default)]
    pub steps: Vec<LogEntry>,
}

/// Dimensions and state of a session's derived view.
#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub(super) struct ViewSummary {
    version: u64,
    n_rows: usize,
    n_cols: usize,
    n_variants: usize,
    aggregated: bool,
    selected_rows: Vec<usize>,
    selected_cols: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unknown_ids: Option<usize>,
}

impl ViewSummary {
    fn of(snapshot: &Snapshot) -> Self {
        let v = &snapshot.view;
        ViewSummary {
            version: snapshot.version,
            n_rows: v.n_rows(),
            n_cols: v.n_cols(),
            n_variants: v.n_variants(),
            aggregated: v.is_aggregated(),
            selected_rows: v.selected_rows(),
            selected_cols: v.selected_cols(),
            unknown_ids: None,
        }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SessionResponse {
    session_id: String,
    dataset_id: String,
    view: ViewSummary,
}

pub(super) async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<SessionRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(payload)?;
    let worker = state.clone();
    let dataset_id = req.dataset_id.clone();
    let session_id =
        blocking(move || worker.create_session(&req.dataset_id, ViewChain { steps: req.steps })).await?;
    let view = ViewSummary::of(&state.session(&session_id)?.snapshot());
    Ok((StatusCode::CREATED, Json(SessionResponse { session_id, dataset_id, view })).into_response())
}

pub(super) async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let view = ViewSummary::of(&session.snapshot());
    Ok(Json(SessionResponse { session_id: id, dataset_id: session.dataset_id.clone(), view }).into_response())
}

pub(super) async fn apply_step(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<LogEntry>, JsonRejection>,
) -> Result<Response, ApiError> {
    let entry = body(payload)?;
    let session = state.session(&id)?;
    let (snapshot, report) = blocking(move || Ok(session.apply(entry.step)?)).await?;
    let mut summary = ViewSummary::of(&snapshot);
    summary.unknown_ids = report.unknown_ids;
    Ok(Json(summary).into_response())
}

pub(super) async fn undo_step(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let snapshot = blocking(move || {
        session.undo().ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "NothingToUndo", "the step log is empty"))
    })
    .await?;
    Ok(Json(ViewSummary::of(&snapshot)).into_response())
}

pub(crate) fn parse_range(what: &str, text: &str) -> Result<Range<usize>, ApiError> {
    let bad = || ApiError::bad_request(format!("{what}: expected a..b, got {text:?}"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok(a..b)
}

fn required<'a>(params: &'a HashMap<String, String>, key: &str) -> Result<&'a str, ApiError> {
    params.get(key).map(String::as_str).ok_or_else(|| ApiError::bad_request(format!("missing query parameter {key:?}")))
}

fn optional<T: std::str::FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError>
where
    T::Err: std::fmt::Display,
{
    params
        .get(key)
        .map(|v| v.parse::<T>().map_err(|e| ApiError::bad_request(format!("{key}: {e}"))))
        .transpose()
}

fn versioned(mut response: Response, version: u64) -> Response {
    response.headers_mut().insert("x-view-version", HeaderValue::from(version));
    response
}

fn bytes_response(content_type: &'static str, bytes: Vec<u8>, version: u64) -> Response {
    versioned(([(header::CONTENT_TYPE, content_type)], bytes).into_response(), version)
}

pub(super) async fn get_tile(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(params): Params,
) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let rows = parse_range("rows", required(&params, "rows")?)?;
    let cols = parse_range("cols", required(&params, "cols")?)?;
    let snapshot = session.snapshot();
    if let Some(expected) = optional::<u64>(&params, "version")? {
        if expected != snapshot.version {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "VersionMismatch",
                format!("view is at version {}, request pinned {expected}", snapshot.version),
            ));
        }
    }
    let tile = Tile::from_view(&session.dataset, &snapshot.view, rows, cols)?;
    Ok(bytes_response("application/octet-stream", tile.encode(), snapshot.version))
}

/// Render options from query parameters, on top of the defaults.
pub(crate) fn render_options(params: &HashMap<String, String>) -> Result<RenderOptions, ApiError> {
    let mut opts = RenderOptions::default();
    if let Some(e) = optional(params, "encoding")? {
        opts.encoding = e;
    }
    if let Some(s) = optional(params, "aggStyle")? {
        opts.agg_style = s;
    }
    if let Some(w) = optional(params, "cellW")? {
        opts.cell_width = w;
    }
    if let Some(h) = optional(params, "cellH")? {
        opts.cell_height = h;
    }
    if let Some(g) = optional(params, "grid")? {
        opts.show_grid = g;
    }
    if let Some(colors) = params.get("colors") {
        opts.colors = serde_json::from_str(colors).map_err(|e| ApiError::bad_request(format!("colors: {e}")))?;
    }
    Ok(opts)
}

pub(super) async fn get_overview(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(params): Params,
) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let opts = render_options(&params)?;
    let max_w = optional(&params, "maxW")?.unwrap_or(512);
    let max_h = optional(&params, "maxH")?.unwrap_or(512);
    let snapshot = session.snapshot();
    let version = snapshot.version;
    let png = blocking(move || {
        Ok(encode_png(&render_overview(&session.dataset, &snapshot.view, &opts, max_w, max_h)?))
    })
    .await?;
    Ok(bytes_response("image/png", png, version))
}

pub(super) async fn get_export(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(params): Params,
) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let opts = render_options(&params)?;
    let format: ImageFormat = match params.get("format") {
        Some(f) => f.parse()?,
        None => ImageFormat::Png,
    };
    let region = match params.get("region").map(|r| r.to_ascii_lowercase()) {
        None => Region::Full,
        Some(r) if r == "full" => Region::Full,
        Some(r) if r == "visible" => Region::Visible {
            rows: parse_range("rows", required(&params, "rows")?)?,
            cols: parse_range("cols", required(&params, "cols")?)?,
        },
        Some(r) => return Err(ApiError::bad_request(format!("region: expected full or visible, got {r:?}"))),
    };
    let snapshot = session.snapshot();
    let version = snapshot.version;
    let bytes = blocking(move || Ok(export_image(&session.dataset, &snapshot.view, &opts, format, &region)?)).await?;
    Ok(bytes_response(format.mime(), bytes, version))
}

pub(super) async fn get_meta(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let snapshot = session.snapshot();
    let payload = super::meta::MetaPayload::build(&session.dataset, &snapshot.view, snapshot.version);
    Ok(versioned(Json(payload).into_response(), snapshot.version))
}

pub(super) async fn get_log(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    Ok(Json(session.log()).into_response())
}
