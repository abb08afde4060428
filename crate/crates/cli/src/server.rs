//! HTTP service: chat sessions, model snapshots, analyses and mutations.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{any, get, post};
use axum::{Json, Router};
use codesign_core::agent::Reply;
use codesign_core::mutation::{replica_names, DEFAULT_COPIES};
use codesign_core::{
    critical_path, find_spofs, propagate, replicate_node, to_dot, to_xml, verbalize, Agent, AnalysisError, ModelError,
    MutationError, Session, SharedDocument,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

const DEFAULT_SESSION: &str = "default";

const PLACEHOLDER_INDEX: &str = "<!doctype html>\n<title>codesign</title>\n\
<p>The codesign service is running. The JSON API lives under <code>/api</code>; \
start with <code>--static-dir</code> to serve a web client here.</p>\n";

pub struct AppState {
    doc: SharedDocument,
    agent: Agent,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl AppState {
    pub fn new(doc: SharedDocument, agent: Agent) -> Arc<Self> {
        Arc::new(AppState {
            doc,
            agent,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn document(&self) -> &SharedDocument {
        &self.doc
    }

    fn session(&self, id: &str) -> Arc<Mutex<Session>> {
        Arc::clone(
            lock(&self.sessions)
                .entry(id.to_string())
                .or_insert_with(|| Arc::new(Mutex::new(Session::new(id)))),
        )
    }

    fn existing_session(&self, id: &str) -> Option<Arc<Mutex<Session>>> {
        lock(&self.sessions).get(id).cloned()
    }
}

/// A structured error body: `{"error": {"kind", "message"}}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::UnknownNodeRef(_) => ApiError::new(StatusCode::BAD_REQUEST, "unknown_node", e.to_string()),
            AnalysisError::NoStartOrEnd(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "analysis_error", e.to_string())
            }
        }
    }
}

impl From<MutationError> for ApiError {
    fn from(e: MutationError) -> Self {
        let message = e.to_string();
        match e {
            MutationError::UnknownNodeRef(_) => ApiError::new(StatusCode::BAD_REQUEST, "unknown_node", message),
            MutationError::NameCollision(_) => ApiError::new(StatusCode::CONFLICT, "name_collision", message),
            MutationError::TrivialModel(_) | MutationError::InvalidCopies(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_mutation", message)
            }
            MutationError::Analysis(inner) => ApiError::from(inner),
            MutationError::Model(ModelError::Io { .. }) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "model_write_failed", message)
            }
            MutationError::Model(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "model_error", message),
        }
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))
}

#[derive(Deserialize)]
struct ChatRequest {
    session: Option<String>,
    prompt: String,
}

#[derive(Serialize)]
struct ChatResponse {
    session: String,
    #[serde(flatten)]
    reply: Reply,
}

async fn chat(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<ChatResponse>, ApiError> {
    let request: ChatRequest = parse_body(&body)?;
    if request.prompt.trim().is_empty() {
        return Err(ApiError::bad_request("prompt is empty"));
    }
    let id = request.session.filter(|s| !s.trim().is_empty()).unwrap_or_else(|| DEFAULT_SESSION.into());
    let session = state.session(&id);
    let reply = blocking(move || {
        let mut session = lock(&session);
        state.agent.handle(&request.prompt, &mut session, &state.doc)
    })
    .await?;
    Ok(Json(ChatResponse { session: id, reply }))
}

#[derive(Deserialize)]
struct FormatQuery {
    format: Option<String>,
}

async fn model(State(state): State<Arc<AppState>>, Query(query): Query<FormatQuery>) -> Result<Response, ApiError> {
    let model = state.doc.snapshot();
    let text = |content_type: &'static str, body: String| ([(header::CONTENT_TYPE, content_type)], body).into_response();
    Ok(match query.format.as_deref().unwrap_or("json") {
        "json" => Json(&*model).into_response(),
        "ir" => text("text/plain; charset=utf-8", verbalize(&model).text),
        "dot" => text("text/vnd.graphviz; charset=utf-8", to_dot(&model, None)),
        "xml" => text("application/xml; charset=utf-8", to_xml(&model)),
        other => return Err(ApiError::bad_request(format!("unknown format `{other}`; use ir, dot, json or xml"))),
    })
}

async fn spof(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let model = state.doc.snapshot();
    let report = blocking(move || find_spofs(&model)).await??;
    Ok(Json(report).into_response())
}

#[derive(Deserialize)]
struct PropagateRequest {
    faults: Vec<String>,
}

async fn propagate_faults(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let request: PropagateRequest = parse_body(&body)?;
    let fault = propagate(&state.doc.snapshot(), &request.faults)?;
    Ok(Json(fault).into_response())
}

#[derive(Deserialize)]
struct ExcludeQuery {
    exclude: Option<String>,
}

async fn critical(State(state): State<Arc<AppState>>, Query(query): Query<ExcludeQuery>) -> Result<Response, ApiError> {
    let exclude: Vec<&str> = query
        .exclude
        .as_deref()
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let paths = critical_path(&state.doc.snapshot(), exclude)?;
    Ok(Json(paths).into_response())
}

#[derive(Deserialize)]
struct ReplicateRequest {
    target: String,
    copies: Option<usize>,
}

async fn replicate(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let request: ReplicateRequest = parse_body(&body)?;
    let copies = request.copies.unwrap_or(DEFAULT_COPIES);
    let target = request.target;
    let replicas = replica_names(&target, copies);
    let model = blocking({
        let target = target.clone();
        move || state.doc.update(|m| replicate_node(m, &target, copies))
    })
    .await??;
    Ok(Json(json!({ "target": target, "replicas": replicas, "revision": model.revision() })).into_response())
}

async fn history(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state
        .existing_session(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`")))?;
    let session = lock(&session);
    Ok(Json(json!({ "session": id, "history": session.history(), "memory": session.memory() })).into_response())
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let model = state.doc.snapshot();
    Json(json!({
        "status": "ok",
        "model": model.name(),
        "revision": model.revision(),
        "backend": state.agent.backend().name(),
        "sessions": lock(&state.sessions).len(),
    }))
}

async fn api_not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/chat", post(chat))
        .route("/api/model", get(model))
        .route("/api/model/replicate", post(replicate))
        .route("/api/analysis/spof", get(spof))
        .route("/api/analysis/propagate", post(propagate_faults))
        .route("/api/analysis/critical-path", get(critical))
        .route("/api/sessions/{id}/history", get(history))
        .route("/api/health", get(health))
        .route("/api/{*rest}", any(api_not_found))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api
            .route("/", get(|| async { Html(PLACEHOLDER_INDEX) }))
            .fallback(api_not_found),
    }
}

pub async fn serve(state: Arc<AppState>, addr: &str, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    eprintln!("codesign listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir)).await
}
