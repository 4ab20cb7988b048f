//! HTTP service: queue scans, poll their status, fetch matrices, maps and
//! share reports.

use std::collections::HashMap;
use std::io::Cursor;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;
use terracover::data::{class_table, LandCoverClass};
use terracover::scanner::{default_palette, render_map, scan_image};
use terracover::stats::{class_shares, Region};
use terracover::{Checkpoint, ClassificationMatrix};
use tokio::sync::mpsc;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8760";
pub const DEFAULT_UPLOAD_LIMIT: usize = 512 * 1024 * 1024;

const INDEX_HTML: &str = include_str!("../static/index.html");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone)]
struct Job {
    status: JobStatus,
    source: String,
    error: Option<String>,
    matrix: Option<Arc<ClassificationMatrix>>,
    /// Serialized once so repeated reads return identical bytes.
    matrix_json: Option<Bytes>,
}

#[derive(Clone)]
pub struct AppState {
    model: Arc<Checkpoint>,
    jobs: Arc<RwLock<HashMap<String, Job>>>,
    queue: mpsc::UnboundedSender<(String, Bytes)>,
}

/// Builds the router and starts the serial scan worker on the current runtime.
pub fn app(model: Checkpoint, upload_limit: usize) -> Router {
    let (tx, rx) = mpsc::unbounded_channel();
    let state = AppState { model: Arc::new(model), jobs: Arc::default(), queue: tx };
    tokio::spawn(worker(state.clone(), rx));
    Router::new()
        .route("/", get(|| async { Html(INDEX_HTML) }))
        .route("/api/classes", get(classes))
        .route("/api/scans", post(submit))
        .route("/api/scans/{id}", get(status))
        .route("/api/scans/{id}/matrix", get(matrix))
        .route("/api/scans/{id}/map.png", get(map_png))
        .route("/api/scans/{id}/stats", get(stats))
        .layer(DefaultBodyLimit::max(upload_limit))
        .with_state(state)
}

async fn worker(state: AppState, mut rx: mpsc::UnboundedReceiver<(String, Bytes)>) {
    while let Some((id, body)) = rx.recv().await {
        let source = update(&state, &id, |j| j.status = JobStatus::Running).unwrap_or_default();
        let model = state.model.clone();
        let outcome = tokio::task::spawn_blocking(move || -> Result<(ClassificationMatrix, Bytes), String> {
            let image = image::load_from_memory(&body).map_err(|e| format!("cannot decode image: {e}"))?.to_rgb8();
            let m = scan_image(&model, &image, &source).map_err(|e| e.to_string())?;
            let json = m.to_json().map_err(|e| e.to_string())?;
            Ok((m, Bytes::from(json)))
        })
        .await
        .unwrap_or_else(|e| Err(format!("scan task panicked: {e}")));
        update(&state, &id, |j| match outcome {
            Ok((m, json)) => {
                j.status = JobStatus::Done;
                j.matrix = Some(Arc::new(m));
                j.matrix_json = Some(json);
            }
            Err(e) => {
                j.status = JobStatus::Failed;
                j.error = Some(e);
            }
        });
    }
}

fn update(state: &AppState, id: &str, f: impl FnOnce(&mut Job)) -> Option<String> {
    let mut jobs = state.jobs.write().expect("job store poisoned");
    let job = jobs.get_mut(id)?;
    f(job);
    Some(job.source.clone())
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn field_error(field: &str, message: impl Into<String>) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": message.into(), "field": field }))).into_response()
}

async fn classes() -> Response {
    Json(class_table()).into_response()
}

async fn submit(State(state): State<AppState>, Query(q): Query<HashMap<String, String>>, headers: HeaderMap, body: Bytes) -> Response {
    if body.is_empty() {
        return field_error("body", "upload is empty");
    }
    let source = q
        .get("name")
        .cloned()
        .or_else(|| headers.get("x-filename").and_then(|v| v.to_str().ok()).map(str::to_string))
        .unwrap_or_else(|| "upload".to_string());
    let id = uuid::Uuid::new_v4().simple().to_string();
    let job = Job { status: JobStatus::Queued, source: source.clone(), error: None, matrix: None, matrix_json: None };
    state.jobs.write().expect("job store poisoned").insert(id.clone(), job);
    if state.queue.send((id.clone(), body)).is_err() {
        return error(StatusCode::SERVICE_UNAVAILABLE, "scan worker has stopped");
    }
    (StatusCode::ACCEPTED, Json(json!({ "id": id, "status": JobStatus::Queued, "source": source }))).into_response()
}

fn lookup(state: &AppState, id: &str) -> Result<Job, Response> {
    let jobs = state.jobs.read().expect("job store poisoned");
    jobs.get(id).cloned().ok_or_else(|| error(StatusCode::NOT_FOUND, format!("no scan with id {id}")))
}

fn finished(state: &AppState, id: &str) -> Result<(Arc<ClassificationMatrix>, Bytes), Response> {
    let job = lookup(state, id)?;
    match (job.matrix, job.matrix_json) {
        (Some(m), Some(j)) => Ok((m, j)),
        _ => Err(error(StatusCode::CONFLICT, format!("scan {id} is {:?}", job.status).to_lowercase())),
    }
}

async fn status(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match lookup(&state, &id) {
        Ok(job) => Json(json!({
            "id": id,
            "status": job.status,
            "source": job.source,
            "error": job.error,
            "rows": job.matrix.as_ref().map(|m| m.rows()),
            "cols": job.matrix.as_ref().map(|m| m.cols()),
        }))
        .into_response(),
        Err(r) => r,
    }
}

async fn matrix(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match finished(&state, &id) {
        Ok((_, json)) => ([(header::CONTENT_TYPE, "application/json")], json).into_response(),
        Err(r) => r,
    }
}

async fn map_png(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<HashMap<String, String>>) -> Response {
    let scale = match q.get("scale").map(|s| s.parse::<u32>()) {
        None => 4,
        Some(Ok(s)) if (1..=64).contains(&s) => s,
        _ => return field_error("scale", "scale must be an integer between 1 and 64"),
    };
    let (m, _) = match finished(&state, &id) {
        Ok(v) => v,
        Err(r) => return r,
    };
    let png = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, String> {
        let (img, _) = render_map(&m, &default_palette(), scale).map_err(|e| e.to_string())?;
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).map_err(|e| e.to_string())?;
        Ok(out.into_inner())
    })
    .await;
    match png {
        Ok(Ok(bytes)) => ([(header::CONTENT_TYPE, "image/png")], bytes).into_response(),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

/// Parses `r0, r1, c0, c1` (each defaulting to the full grid) and a
/// comma-separated exclusion list of class names.
pub fn parse_stats_query(
    q: &HashMap<String, String>,
    matrix: &ClassificationMatrix,
) -> Result<(Region, Vec<LandCoverClass>), (&'static str, String)> {
    let full = Region::full(matrix);
    let mut region = full;
    for (field, slot) in [("r0", &mut region.r0), ("r1", &mut region.r1), ("c0", &mut region.c0), ("c1", &mut region.c1)] {
        if let Some(v) = q.get(field) {
            *slot = v.trim().parse().map_err(|_| (field, format!("{field} must be a non-negative integer, got {v:?}")))?;
        }
    }
    if region.r0 >= region.r1 || region.r1 > full.r1 {
        return Err(("r0", format!("row range {}..{} is not within 0..{}", region.r0, region.r1, full.r1)));
    }
    if region.c0 >= region.c1 || region.c1 > full.c1 {
        return Err(("c0", format!("column range {}..{} is not within 0..{}", region.c0, region.c1, full.c1)));
    }
    let exclude = match q.get("exclude") {
        Some(list) => parse_class_list(list).map_err(|e| ("exclude", e))?,
        None => Vec::new(),
    };
    Ok((region, exclude))
}

pub fn parse_class_list(list: &str) -> Result<Vec<LandCoverClass>, String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| LandCoverClass::from_display_name(name).map_err(|e| e.to_string()))
        .collect()
}

async fn stats(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<HashMap<String, String>>) -> Response {
    let (m, _) = match finished(&state, &id) {
        Ok(v) => v,
        Err(r) => return r,
    };
    let (region, exclude) = match parse_stats_query(&q, &m) {
        Ok(v) => v,
        Err((field, msg)) => return field_error(field, msg),
    };
    // Same bytes as `terracover stats --format json`.
    match class_shares(&m, Some(region), &exclude).and_then(|r| r.to_json()).map(|j| j + "\n") {
        Ok(body) => ([(header::CONTENT_TYPE, "application/json")], body).into_response(),
        Err(e @ terracover::Error::EmptyRegion) => field_error("exclude", e.to_string()),
        Err(e) => field_error("region", e.to_string()),
    }
}

pub async fn serve(model: Checkpoint, addr: &str, upload_limit: usize) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app(model, upload_limit)).await
}
