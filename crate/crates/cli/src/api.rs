//! JSON over HTTP. Every repository call runs on the blocking pool; the
//! repository serializes writers itself.

use std::sync::Arc;
use std::time::Instant;

use axum::body::Body;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, Request, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use rdm_core::deck::SlideDeckRequest;
use rdm_core::graph::{export_dot, export_json};
use rdm_core::model::{PermId, VocabularyTerm};
use rdm_core::workflows::JobOutcome;
use rdm_core::ErrorCode;

use crate::config::ApiConfig;
use crate::error::ApiError;
use crate::jobs::{JobRegistry, JobStatus};
use crate::service::{CreateObject, FormatChoice, GraphQuery, Ingest, LinkRequest, Service};

/// Largest accepted request body.
pub const MAX_BODY_BYTES: usize = 512 * 1024 * 1024;

pub const DATASET_ID_HEADER: &str = "x-dataset-id";

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone)]
pub struct AppState {
    pub service: Service,
    pub jobs: Arc<JobRegistry>,
    pub token: Option<String>,
    pub public_read: bool,
}

impl AppState {
    pub fn new(service: Service, token: Option<String>, public_read: bool) -> Self {
        AppState {
            service,
            jobs: Arc::new(JobRegistry::default()),
            token: token.filter(|t| !t.is_empty()),
            public_read,
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/objects", post(create_object).get(list_objects))
        .route("/objects/{id}", get(get_object))
        .route("/objects/{id}/audit", get(audit))
        .route("/links", post(link))
        .route("/graph", get(graph))
        .route("/vocabularies/{name}", get(vocabulary))
        .route("/vocabularies/{name}/terms", post(extend_vocabulary))
        .route("/datasets", post(upload_dataset).get(list_datasets))
        .route("/datasets/{id}", get(get_dataset))
        .route("/datasets/{id}/blob", get(dataset_blob))
        .route("/datasets/{id}/preview", get(preview).post(regenerate_preview))
        .route("/workflows/tick", post(tick))
        .route("/workflows/stress-strain/{entry}", post(stress_strain))
        .route("/workflows/prep-report/{entry}", post(prep_report))
        .route("/workflows/status/{job}", get(job_status))
        .route("/decks", post(deck))
        .route("/qr/{id}", get(qr))
        .route("/store/check", get(store_check))
        .route("/store/gc", post(store_gc))
        .layer(middleware::from_fn_with_state(state.clone(), authorize))
        .layer(middleware::from_fn(log_request))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

/// Binds, optionally starts the periodic scheduler, and serves until Ctrl-C.
pub async fn serve(config: ApiConfig) -> Result<(), rdm_core::Error> {
    config.validate()?;
    let service = {
        let (journal, blobs) = (config.journal.clone(), config.blob_root.clone());
        tokio::task::spawn_blocking(move || Service::open(&journal, &blobs))
            .await
            .map_err(|e| rdm_core::Error::io("startup task", std::io::Error::other(e)))??
    };
    let state = AppState::new(service.clone(), config.token.clone(), config.public_read);
    if let Some(every) = config.scheduler_interval {
        tokio::spawn(scheduler_loop(service, every));
    }
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|e| rdm_core::Error::io(format!("binding {}", config.bind), e))?;
    tracing::info!(bind = %config.bind, auth = state.token.is_some(), "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| rdm_core::Error::io("serving", e))
}

async fn scheduler_loop(service: Service, every: std::time::Duration) {
    let mut interval = tokio::time::interval(every);
    interval.tick().await;
    loop {
        interval.tick().await;
        let svc = service.clone();
        match tokio::task::spawn_blocking(move || svc.tick()).await {
            Ok(Ok(outcomes)) => {
                let executed = rdm_core::workflows::executed_count(&outcomes);
                tracing::info!(jobs = outcomes.len(), executed, "scheduler tick");
            }
            Ok(Err(e)) if e.code() == ErrorCode::Busy => tracing::debug!("scheduler busy, skipping tick"),
            Ok(Err(e)) => tracing::warn!(code = e.code().as_str(), error = %e, "scheduler tick failed"),
            Err(e) => tracing::error!(error = %e, "scheduler task panicked"),
        }
    }
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> rdm_core::Result<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Core(rdm_core::Error::io("worker task", std::io::Error::other(e))))?
        .map_err(ApiError::from)
}

fn perm_id(s: &str) -> ApiResult<PermId> {
    Ok(s.parse()?)
}

async fn authorize(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let Some(token) = state.token.as_deref() else {
        return next.run(req).await;
    };
    let read = matches!(*req.method(), Method::GET | Method::HEAD);
    if read && state.public_read {
        return next.run(req).await;
    }
    let presented = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(token) {
        next.run(req).await
    } else {
        ApiError::Unauthorized.into_response()
    }
}

async fn log_request(req: Request, next: Next) -> Response {
    let (method, path) = (req.method().clone(), req.uri().path().to_string());
    let started = Instant::now();
    let resp = next.run(req).await;
    tracing::info!(
        %method,
        path,
        status = resp.status().as_u16(),
        elapsed_ms = started.elapsed().as_millis() as u64,
        "request"
    );
    resp
}

async fn create_object(State(s): State<AppState>, Json(req): Json<CreateObject>) -> ApiResult<Response> {
    let rec = blocking(move || s.service.create_object(req)).await?;
    Ok((StatusCode::CREATED, Json(rec)).into_response())
}

#[derive(Debug, Deserialize)]
struct ListObjects {
    #[serde(rename = "type")]
    type_name: Option<String>,
}

async fn list_objects(State(s): State<AppState>, Query(q): Query<ListObjects>) -> ApiResult<Response> {
    let list = blocking(move || Ok(s.service.list_objects(q.type_name.as_deref()))).await?;
    Ok(Json(list).into_response())
}

async fn get_object(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = perm_id(&id)?;
    Ok(Json(blocking(move || s.service.get_object(&id)).await?).into_response())
}

async fn audit(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = perm_id(&id)?;
    Ok(Json(blocking(move || s.service.audit(&id)).await?).into_response())
}

async fn link(State(s): State<AppState>, Json(req): Json<LinkRequest>) -> ApiResult<Response> {
    blocking(move || s.service.link(&req)).await?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

#[derive(Debug, Deserialize)]
struct GraphParams {
    root: Option<String>,
    direction: Option<String>,
    depth: Option<usize>,
    element: Option<String>,
    format: Option<String>,
}

async fn graph(State(s): State<AppState>, Query(p): Query<GraphParams>) -> ApiResult<Response> {
    let dot = match p.format.as_deref() {
        None | Some("json") => false,
        Some("dot") => true,
        Some(other) => return Err(ApiError::BadRequest(format!("format must be json or dot, not `{other}`"))),
    };
    let q = GraphQuery {
        root: p.root.as_deref().map(perm_id).transpose()?,
        direction: p.direction.as_deref().map(str::parse).transpose()?,
        depth: p.depth,
        element: p.element,
    };
    let g = blocking(move || s.service.graph(&q)).await?;
    Ok(if dot {
        ([(header::CONTENT_TYPE, "text/vnd.graphviz")], export_dot(&g)).into_response()
    } else {
        ([(header::CONTENT_TYPE, "application/json")], export_json(&g)).into_response()
    })
}

async fn vocabulary(State(s): State<AppState>, Path(name): Path<String>) -> ApiResult<Response> {
    Ok(Json(blocking(move || s.service.vocabulary(&name)).await?).into_response())
}

async fn extend_vocabulary(
    State(s): State<AppState>,
    Path(name): Path<String>,
    Json(term): Json<VocabularyTerm>,
) -> ApiResult<Response> {
    let v = blocking(move || s.service.extend_vocabulary(&name, term)).await?;
    Ok((StatusCode::CREATED, Json(v)).into_response())
}

async fn upload_dataset(State(s): State<AppState>, mut form: Multipart) -> ApiResult<Response> {
    let bad = |e: axum::extract::multipart::MultipartError| ApiError::BadRequest(e.body_text());
    let (mut file, mut entry, mut format, mut dataset_type) = (None, None, FormatChoice::Auto, None);
    while let Some(field) = form.next_field().await.map_err(bad)? {
        match field.name().unwrap_or("") {
            "file" => {
                let name = field.file_name().unwrap_or("upload.bin").to_string();
                file = Some((name, field.bytes().await.map_err(bad)?.to_vec()));
            }
            "entry" => entry = Some(perm_id(field.text().await.map_err(bad)?.trim())?),
            "format" => format = field.text().await.map_err(bad)?.trim().parse()?,
            "type" => dataset_type = Some(field.text().await.map_err(bad)?.trim().to_string()),
            other => return Err(ApiError::BadRequest(format!("unexpected form field `{other}`"))),
        }
    }
    let (filename, bytes) = file.ok_or_else(|| ApiError::BadRequest("missing `file` field".into()))?;
    let entry = entry.ok_or_else(|| ApiError::BadRequest("missing `entry` field".into()))?;
    let req = Ingest {
        entry,
        bytes,
        filename,
        format,
        dataset_type: dataset_type.unwrap_or_else(|| "OTHER".into()),
    };
    let d = blocking(move || s.service.ingest(req)).await?;
    Ok((StatusCode::CREATED, Json(d)).into_response())
}

#[derive(Debug, Deserialize)]
struct ListDatasets {
    entry: Option<String>,
}

async fn list_datasets(State(s): State<AppState>, Query(q): Query<ListDatasets>) -> ApiResult<Response> {
    let entry = q.entry.as_deref().map(perm_id).transpose()?;
    Ok(Json(blocking(move || s.service.list_datasets(entry.as_ref())).await?).into_response())
}

async fn get_dataset(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = perm_id(&id)?;
    Ok(Json(blocking(move || s.service.get_dataset(&id)).await?).into_response())
}

async fn dataset_blob(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = perm_id(&id)?;
    let (d, bytes) = blocking(move || s.service.dataset_blob(&id)).await?;
    let disposition = format!("attachment; filename=\"{}\"", d.original_filename.replace('"', "_"));
    let mut resp = Response::new(Body::from(bytes));
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/octet-stream"));
    if let Ok(v) = HeaderValue::from_str(&disposition) {
        headers.insert(header::CONTENT_DISPOSITION, v);
    }
    Ok(resp)
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn preview(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = perm_id(&id)?;
    Ok(png(blocking(move || s.service.preview(&id)).await?))
}

async fn regenerate_preview(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = perm_id(&id)?;
    Ok(png(blocking(move || s.service.regenerate_preview(&id)).await?))
}

#[derive(Debug, Default, Deserialize)]
struct RunParams {
    #[serde(default)]
    wait: bool,
    #[serde(default)]
    force: bool,
}

/// Body of a 202 response for a queued run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accepted {
    pub job_id: u64,
    pub status_url: String,
}

/// Runs `work` inline when `wait` is set, otherwise in the background with a
/// pollable job id.
async fn run_job<F>(s: AppState, kind: &str, wait: bool, work: F) -> ApiResult<Response>
where
    F: FnOnce(&Service) -> rdm_core::Result<Vec<JobOutcome>> + Send + 'static,
{
    let svc = s.service.clone();
    if wait {
        let outcomes = blocking(move || work(&svc)).await?;
        return Ok(Json(outcomes).into_response());
    }
    let id = s.jobs.start(kind);
    let jobs = s.jobs.clone();
    tokio::spawn(async move {
        let result = blocking(move || work(&svc)).await.map_err(|e| e.body());
        jobs.finish(id, result);
    });
    let body = Accepted {
        job_id: id,
        status_url: format!("/workflows/status/{id}"),
    };
    Ok((StatusCode::ACCEPTED, Json(body)).into_response())
}

async fn tick(State(s): State<AppState>, Query(p): Query<RunParams>) -> ApiResult<Response> {
    run_job(s, "tick", p.wait, |svc| svc.tick()).await
}

async fn stress_strain(
    State(s): State<AppState>,
    Path(entry): Path<String>,
    Query(p): Query<RunParams>,
) -> ApiResult<Response> {
    let entry = perm_id(&entry)?;
    run_job(s, rdm_core::workflows::STRESS_STRAIN, p.wait, move |svc| {
        svc.stress_strain(&entry, p.force).map(|o| vec![o])
    })
    .await
}

/// Response of the preparation report endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepReportResponse {
    pub table: rdm_core::workflows::ReportTable,
    pub outcome: JobOutcome,
}

async fn prep_report(
    State(s): State<AppState>,
    Path(entry): Path<String>,
    Query(p): Query<RunParams>,
) -> ApiResult<Response> {
    let entry = perm_id(&entry)?;
    let (table, outcome) = blocking(move || s.service.prep_report(&entry, p.force)).await?;
    Ok(Json(PrepReportResponse { table, outcome }).into_response())
}

async fn job_status(State(s): State<AppState>, Path(job): Path<u64>) -> ApiResult<Json<JobStatus>> {
    s.jobs
        .get(job)
        .map(Json)
        .ok_or_else(|| ApiError::Core(rdm_core::Error::NotFound(format!("job {job}"))))
}

async fn deck(State(s): State<AppState>, Json(req): Json<SlideDeckRequest>) -> ApiResult<Response> {
    let deck = blocking(move || s.service.deck(&req)).await?;
    let mut resp = Response::new(Body::from(deck.html));
    *resp.status_mut() = StatusCode::CREATED;
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("text/html; charset=utf-8"));
    if let Ok(v) = HeaderValue::from_str(&deck.dataset.dataset_id.to_string()) {
        headers.insert(DATASET_ID_HEADER, v);
    }
    Ok(resp)
}

async fn qr(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = perm_id(&id)?;
    Ok(Json(blocking(move || s.service.qr(&id)).await?).into_response())
}

async fn store_check(State(s): State<AppState>) -> ApiResult<Response> {
    Ok(Json(blocking(move || s.service.check()).await?).into_response())
}

async fn store_gc(State(s): State<AppState>) -> ApiResult<Response> {
    Ok(Json(blocking(move || s.service.gc()).await?).into_response())
}
