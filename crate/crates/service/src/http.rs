//! JSON HTTP API over a directory of projects.
//!
//! | Method | Route | Body / result |
//! |---|---|---|
//! | GET | `/api/projects` | ids |
//! | GET | `/api/projects/{id}` | revision and stage freshness |
//! | GET | `/api/projects/{id}/document` | revision and stroke document |
//! | GET | `/api/projects/{id}/candidates` | revision and tagged candidates |
//! | POST | `/api/projects/{id}/ops` | `{revision, op}` → `{revision, changed, message}` |
//! | POST | `/api/projects/{id}/undo` | `{revision}` → same |
//! | POST | `/api/projects/{id}/strokes/{stroke}/style` | `{revision, style}` → same |
//! | POST | `/api/projects/{id}/stages/{stage}` | runs one stage → stage record |
//! | GET | `/api/projects/{id}/artifacts/{name}` | artifact bytes, fresh only |
//!
//! Errors are `{error, message, ...}` with 400, 404, 409 (revision conflict or
//! stale stage, with `currentRevision` or `rerun`), 422 (rejected edit, with
//! `distance` for a merge that is too far) or 500.
//!
//! Mutations of one project run one at a time behind a per-project lock;
//! different projects proceed in parallel.

use std::collections::HashMap;
use std::path::{Path as FsPath, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use sumie_core::editor::{EditError, EditOp};
use sumie_core::par::Execution;
use sumie_core::styles::StyleParams;

use crate::project::{validate_id, Project, Stage};
use crate::stages::{self, apply_edit, read_artifact, run_stage, set_stroke_style, undo_edit};
use crate::ServiceError;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    dir: PathBuf,
    exec: Execution,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(dir: impl Into<PathBuf>, exec: Execution) -> Self {
        Self { inner: Arc::new(Inner { dir: dir.into(), exec, locks: Mutex::new(HashMap::new()) }) }
    }

    fn project_path(&self, id: &str) -> Result<PathBuf, ServiceError> {
        validate_id(id)?;
        Ok(self.inner.dir.join(format!("{id}.json")))
    }

    fn lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.inner.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    /// Loads the project under its lock on a blocking thread, runs `f`, and
    /// returns its result. `f` saves the project itself when it mutates.
    async fn with_project<T, F>(&self, id: &str, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Project, &FsPath) -> Result<T, ServiceError> + Send + 'static,
    {
        let path = self.project_path(id)?;
        let guard = self.lock(id).lock_owned().await;
        let out = tokio::task::spawn_blocking(move || {
            let _guard = guard;
            let mut p = Project::load(&path)?;
            f(&mut p, &path)
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(out?)
    }
}

pub fn router(state: AppState, ui: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/projects", get(list_projects))
        .route("/api/projects/{id}", get(project_status))
        .route("/api/projects/{id}/document", get(document))
        .route("/api/projects/{id}/candidates", get(candidates))
        .route("/api/projects/{id}/ops", post(apply_op))
        .route("/api/projects/{id}/undo", post(undo))
        .route("/api/projects/{id}/strokes/{stroke}/style", post(stroke_style))
        .route("/api/projects/{id}/stages/{stage}", post(run))
        .route("/api/projects/{id}/artifacts/{name}", get(artifact))
        .with_state(state);
    match ui {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn internal(message: String) -> Self {
        Self { status: StatusCode::INTERNAL_SERVER_ERROR, body: json!({"error": "internal", "message": message}) }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let message = e.to_string();
        let (status, kind, extra) = match &e {
            ServiceError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                (StatusCode::NOT_FOUND, "notFound", json!({}))
            }
            ServiceError::BadId(_) | ServiceError::Json(_) => (StatusCode::BAD_REQUEST, "badRequest", json!({})),
            ServiceError::UnknownStage(_) | ServiceError::UnknownArtifact(_) => (StatusCode::NOT_FOUND, "notFound", json!({})),
            ServiceError::Conflict { base, current } => {
                (StatusCode::CONFLICT, "conflict", json!({"baseRevision": base, "currentRevision": current}))
            }
            ServiceError::StaleUpstream { rerun, .. } | ServiceError::StaleArtifact { rerun, .. } => {
                (StatusCode::CONFLICT, "stale", json!({"rerun": rerun}))
            }
            ServiceError::NoDocument => (StatusCode::CONFLICT, "noDocument", json!({"rerun": Stage::Vectorize})),
            ServiceError::Edit(EditError::TooFar { distance, radius }) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "rejected", json!({"distance": distance, "radius": radius}))
            }
            ServiceError::Edit(_)
            | ServiceError::Contours(_)
            | ServiceError::Simplify(_)
            | ServiceError::Optimize(_)
            | ServiceError::Mapping(_)
            | ServiceError::Style(_)
            | ServiceError::Trajectory(_)
            | ServiceError::Mesh(_) => (StatusCode::UNPROCESSABLE_ENTITY, "rejected", json!({})),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal", json!({})),
        };
        let mut body = json!({"error": kind, "message": message});
        if let (Some(b), Value::Object(x)) = (body.as_object_mut(), extra) {
            b.extend(x);
        }
        Self { status, body }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

async fn list_projects(State(state): State<AppState>) -> ApiResult {
    let dir = state.inner.dir.clone();
    let ids = tokio::task::spawn_blocking(move || -> Result<Vec<String>, ServiceError> {
        let mut ids: Vec<String> = std::fs::read_dir(&dir)
            .map_err(|e| ServiceError::io(&dir, e))?
            .filter_map(|e| e.ok()?.path().file_name()?.to_str()?.strip_suffix(".json").map(str::to_owned))
            .filter(|id| validate_id(id).is_ok())
            .collect();
        ids.sort();
        Ok(ids)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(json!({ "projects": ids })))
}

async fn project_status(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let v = state.with_project(&id, |p, path| stages::project_status(p, path)).await?;
    Ok(Json(json!(v)))
}

async fn document(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let v = state
        .with_project(&id, |p, _| Ok(json!({"revision": p.revision, "document": p.document()?, "strokeStyles": p.stroke_styles})))
        .await?;
    Ok(Json(v))
}

async fn candidates(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let v = state
        .with_project(&id, |p, _| Ok(json!({"revision": p.revision, "candidates": p.document()?.candidates()})))
        .await?;
    Ok(Json(v))
}

#[derive(Debug, Deserialize)]
pub struct OpRequest {
    pub revision: Option<u64>,
    pub op: EditOp,
}

async fn apply_op(State(state): State<AppState>, Path(id): Path<String>, Json(req): Json<OpRequest>) -> ApiResult {
    let v = state
        .with_project(&id, move |p, path| {
            let out = apply_edit(p, req.revision, req.op)?;
            if out.changed {
                p.save(path)?;
            }
            Ok(out)
        })
        .await?;
    Ok(Json(json!(v)))
}

#[derive(Debug, Deserialize)]
pub struct UndoRequest {
    pub revision: Option<u64>,
}

async fn undo(State(state): State<AppState>, Path(id): Path<String>, Json(req): Json<UndoRequest>) -> ApiResult {
    let v = state
        .with_project(&id, move |p, path| {
            let out = undo_edit(p, req.revision)?;
            p.save(path)?;
            Ok(out)
        })
        .await?;
    Ok(Json(json!(v)))
}

#[derive(Debug, Deserialize)]
pub struct StyleRequest {
    pub revision: Option<u64>,
    /// `null` clears the override.
    pub style: Option<StyleParams>,
}

async fn stroke_style(
    State(state): State<AppState>,
    Path((id, stroke)): Path<(String, u64)>,
    Json(req): Json<StyleRequest>,
) -> ApiResult {
    let v = state
        .with_project(&id, move |p, path| {
            let out = set_stroke_style(p, req.revision, stroke, req.style)?;
            if out.changed {
                p.save(path)?;
            }
            Ok(out)
        })
        .await?;
    Ok(Json(json!(v)))
}

async fn run(State(state): State<AppState>, Path((id, stage)): Path<(String, String)>) -> ApiResult {
    let stage: Stage = stage.parse()?;
    let exec = state.inner.exec;
    let v = state
        .with_project(&id, move |p, path| {
            let record = run_stage(p, path, stage, exec)?;
            Ok(json!({"stage": stage, "revision": p.revision, "record": record}))
        })
        .await?;
    Ok(Json(v))
}

async fn artifact(State(state): State<AppState>, Path((id, name)): Path<(String, String)>) -> Result<Response, ApiError> {
    let bytes = state.with_project(&id, move |p, path| read_artifact(p, path, &name).map(|b| (b, name))).await?;
    let (bytes, name) = bytes;
    let mime = match name.rsplit('.').next() {
        Some("png") => "image/png",
        Some("json") => "application/json",
        Some("jsonl") => "application/x-ndjson",
        _ => "application/octet-stream",
    };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

/// Serves until ctrl-c.
pub async fn serve(state: AppState, addr: &str, ui: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, ui))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
