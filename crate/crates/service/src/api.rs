//! HTTP routes. Handlers hand the work to the blocking pool; the project
//! layer does its own locking.

use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use nodestory::{
    parse_graph_with, serialize_graph, ExportSelection, MediaKind, MediaParams, NewNode, NodeId, ParseMode, Position,
    StoryGraph, TextUpdate,
};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

use crate::error::{ErrorClass, ServiceError};
use crate::eval::{evaluate, EvalRequest};
use crate::project::{ChatRequest, Project};
use crate::Service;

pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

pub fn status_of(e: &ServiceError) -> StatusCode {
    match e.class() {
        ErrorClass::Invalid => StatusCode::BAD_REQUEST,
        ErrorClass::NotFound => StatusCode::NOT_FOUND,
        ErrorClass::Conflict => StatusCode::CONFLICT,
        ErrorClass::Upstream => StatusCode::BAD_GATEWAY,
        ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.0;
        let status = status_of(&e);
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            tracing::error!("{e}");
        }
        let mut body = json!({ "error": e.code(), "message": e.to_string() });
        if let Some(v) = e.violations() {
            body["violations"] = json!(v);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static) -> ApiResult<T> {
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError),
        Err(e) => Err(ApiError(ServiceError::Io {
            path: "worker".to_owned(),
            message: e.to_string(),
        })),
    }
}

fn etag(version: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{version}\"")).expect("digits are a valid header")
}

/// `If-Match` as a version. Absent or `*` means no check.
fn if_match(headers: &HeaderMap) -> ApiResult<Option<u64>> {
    let Some(raw) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let text = raw
        .to_str()
        .map_err(|_| ApiError(ServiceError::BadRequest("If-Match is not text".into())))?
        .trim();
    if text == "*" {
        return Ok(None);
    }
    let bare = text.trim_start_matches("W/").trim_matches('"');
    bare.parse()
        .map(Some)
        .map_err(|_| ApiError(ServiceError::BadRequest(format!("If-Match {text:?} is not a version"))))
}

fn with_etag(version: u64, body: impl IntoResponse) -> Response {
    let mut r = body.into_response();
    r.headers_mut().insert(header::ETAG, etag(version));
    r
}

fn project(service: &Service, id: &str) -> ApiResult<Arc<Project>> {
    service.get(id).map_err(ApiError)
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(project_info))
        .route("/projects/{id}/graph", get(get_graph).put(put_graph))
        .route("/projects/{id}/chat", post(chat))
        .route("/projects/{id}/nodes", post(add_node).delete(remove_nodes))
        .route("/projects/{id}/nodes/{node_id}", patch(update_node))
        .route("/projects/{id}/duplicate", post(duplicate))
        .route("/projects/{id}/media", post(media))
        .route("/projects/{id}/jobs", get(jobs))
        .route("/projects/{id}/events", get(events))
        .route("/projects/{id}/transcripts", get(transcripts))
        .route("/projects/{id}/export", post(export))
        .route("/projects/{id}/export/{document}", get(export_document))
        .route("/projects/{id}/snapshots", get(snapshots))
        .route("/projects/{id}/snapshots/{sid}/restore", post(restore))
        .route("/projects/{id}/prune", post(prune))
        .route("/eval", post(eval))
        .with_state(service)
}

async fn health(State(svc): State<Arc<Service>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "backend": svc.backend().name() }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateProject {
    #[serde(default = "untitled")]
    name: String,
    /// A graph document; an empty project when absent.
    #[serde(default)]
    graph: Option<serde_json::Value>,
    #[serde(default)]
    lenient: bool,
}

fn untitled() -> String {
    "untitled".to_owned()
}

fn mode(lenient: bool) -> ParseMode {
    if lenient {
        ParseMode::Lenient
    } else {
        ParseMode::Strict
    }
}

async fn create_project(State(svc): State<Arc<Service>>, Json(req): Json<CreateProject>) -> ApiResult<Response> {
    let info = blocking(move || {
        let graph = match req.graph {
            Some(doc) => parse_graph_with(&doc.to_string(), mode(req.lenient))?,
            None => StoryGraph::new(),
        };
        Ok(svc.create(&req.name, &graph)?.info())
    })
    .await?;
    Ok(with_etag(info.version, (StatusCode::CREATED, Json(info))))
}

async fn list_projects(State(svc): State<Arc<Service>>) -> ApiResult<Response> {
    let list = blocking(move || svc.list()).await?;
    Ok(Json(list).into_response())
}

async fn project_info(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let info = blocking(move || Ok(svc.get(&id)?.info())).await?;
    Ok(with_etag(info.version, Json(info)))
}

async fn get_graph(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let (graph, version) = blocking(move || Ok(svc.get(&id)?.graph())).await?;
    let body = ([(header::CONTENT_TYPE, "application/json")], serialize_graph(&graph));
    Ok(with_etag(version, body))
}

#[derive(Deserialize, Default)]
struct ModeQuery {
    #[serde(default)]
    mode: Option<String>,
}

async fn put_graph(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Query(q): Query<ModeQuery>,
    headers: HeaderMap,
    body: String,
) -> ApiResult<Response> {
    let expected = if_match(&headers)?;
    let parse_mode = match q.mode.as_deref() {
        None | Some("strict") => ParseMode::Strict,
        Some("lenient") => ParseMode::Lenient,
        Some(other) => return Err(ServiceError::BadRequest(format!("unknown mode {other:?}")).into()),
    };
    let p = project(&svc, &id)?;
    let done = blocking(move || p.replace_graph(&body, parse_mode, expected)).await?;
    Ok(with_etag(done.version, Json(done)))
}

async fn chat(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<ChatRequest>,
) -> ApiResult<Response> {
    let expected = if_match(&headers)?;
    let p = project(&svc, &id)?;
    let reply = blocking(move || p.chat(&req, expected)).await?;
    Ok(with_etag(reply.version, Json(reply)))
}

async fn add_node(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<NewNode>,
) -> ApiResult<Response> {
    let expected = if_match(&headers)?;
    let p = project(&svc, &id)?;
    let done = blocking(move || p.add_node(req, expected)).await?;
    Ok(with_etag(done.version, (StatusCode::CREATED, Json(done))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeList {
    nodes: Vec<NodeId>,
}

async fn remove_nodes(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<NodeList>,
) -> ApiResult<Response> {
    let expected = if_match(&headers)?;
    let p = project(&svc, &id)?;
    let done = blocking(move || p.remove_nodes(&req.nodes, expected)).await?;
    Ok(with_etag(done.version, Json(done)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NodePatch {
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    segment: Option<String>,
    #[serde(default)]
    position: Option<Position>,
}

async fn update_node(
    State(svc): State<Arc<Service>>,
    Path((id, node_id)): Path<(String, String)>,
    headers: HeaderMap,
    Json(req): Json<NodePatch>,
) -> ApiResult<Response> {
    let expected = if_match(&headers)?;
    let p = project(&svc, &id)?;
    let done = blocking(move || {
        let update = TextUpdate {
            label: req.label,
            segment: req.segment,
        };
        p.update_node(&NodeId::from(node_id.as_str()), update, req.position, expected)
    })
    .await?;
    Ok(with_etag(done.version, Json(done)))
}

async fn duplicate(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(req): Json<NodeList>,
) -> ApiResult<Response> {
    let expected = if_match(&headers)?;
    let p = project(&svc, &id)?;
    let done = blocking(move || p.duplicate(&req.nodes, expected)).await?;
    Ok(with_etag(done.version, (StatusCode::CREATED, Json(done))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MediaRequest {
    /// Empty means every node.
    #[serde(default)]
    nodes: Vec<NodeId>,
    kind: MediaKind,
    #[serde(default)]
    voice: Option<String>,
    #[serde(default)]
    style: Option<String>,
}

async fn media(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    Json(req): Json<MediaRequest>,
) -> ApiResult<Response> {
    let p = project(&svc, &id)?;
    let provider = svc.backend().name().to_owned();
    let jobs = blocking(move || {
        let mut params = MediaParams::new(req.kind, provider);
        params.voice = req.voice;
        params.style_instructions = req.style;
        let jobs = p.enqueue(&req.nodes, &params)?;
        p.spawn_media(jobs.clone());
        Ok(jobs)
    })
    .await?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "jobs": jobs }))).into_response())
}

async fn jobs(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let p = project(&svc, &id)?;
    Ok(Json(p.jobs()).into_response())
}

async fn transcripts(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let p = project(&svc, &id)?;
    Ok(Json(p.transcripts()).into_response())
}

/// Server-sent job and stage events, from the moment of connection.
async fn events(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let rx = project(&svc, &id)?.subscribe();
    let stream = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(item) => {
                    let data = match &item.event {
                        crate::ProjectEvent::Job(e) => serde_json::to_string(e),
                        crate::ProjectEvent::Stage(e) => serde_json::to_string(e),
                    }
                    .expect("events serialize");
                    let event = Event::default()
                        .event(item.event.name())
                        .id(item.seq.to_string())
                        .data(data);
                    return Some((Ok(event), rx));
                }
                Err(RecvError::Lagged(n)) => tracing::warn!("event subscriber missed {n} events"),
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

async fn export(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Option<Json<ExportSelection>>,
) -> ApiResult<Response> {
    let selection = body.map(|Json(s)| s).unwrap_or_default();
    let p = project(&svc, &id)?;
    let out = blocking(move || p.export(&selection)).await?;
    Ok(Json(out).into_response())
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SelectionQuery {
    /// Comma separated root-to-sink path.
    #[serde(default)]
    path: Option<String>,
    /// Comma separated node ids, exported in narrative order.
    #[serde(default)]
    nodes: Option<String>,
}

fn id_list(text: &str) -> Vec<NodeId> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(NodeId::from)
        .collect()
}

impl SelectionQuery {
    fn selection(&self) -> ApiResult<ExportSelection> {
        match (&self.path, &self.nodes) {
            (Some(_), Some(_)) => Err(ServiceError::BadRequest("give either path or nodes".into()).into()),
            (Some(p), None) => Ok(ExportSelection::Path(id_list(p))),
            (None, Some(n)) => Ok(ExportSelection::Nodes(id_list(n))),
            (None, None) => Ok(ExportSelection::All),
        }
    }
}

async fn export_document(
    State(svc): State<Arc<Service>>,
    Path((id, document)): Path<(String, String)>,
    Query(q): Query<SelectionQuery>,
) -> ApiResult<Response> {
    let selection = q.selection()?;
    let p = project(&svc, &id)?;
    let (content_type, body) = blocking(move || match document.as_str() {
        "manifest" => Ok((
            "application/json",
            serde_json::to_string_pretty(&p.export_manifest(&selection)?).expect("manifest serializes"),
        )),
        "srt" => Ok(("application/x-subrip", p.export_srt(&selection)?)),
        "storyboard" => Ok(("text/markdown; charset=utf-8", p.export_storyboard(&selection)?)),
        other => Err(ServiceError::BadRequest(format!("unknown export document {other:?}"))),
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, content_type)], body).into_response())
}

async fn snapshots(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> ApiResult<Response> {
    let p = project(&svc, &id)?;
    let head = p.info().head;
    Ok(Json(json!({ "head": head, "snapshots": p.snapshots() })).into_response())
}

async fn restore(
    State(svc): State<Arc<Service>>,
    Path((id, sid)): Path<(String, u64)>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let expected = if_match(&headers)?;
    let p = project(&svc, &id)?;
    let done = blocking(move || p.restore(sid, expected)).await?;
    Ok(with_etag(done.version, Json(done)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PruneRequest {
    #[serde(default = "one")]
    keep: usize,
}

fn one() -> usize {
    1
}

async fn prune(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Option<Json<PruneRequest>>,
) -> ApiResult<Response> {
    let keep = body.map(|Json(r)| r.keep).unwrap_or(1);
    let p = project(&svc, &id)?;
    let out = blocking(move || p.prune(keep)).await?;
    Ok(Json(out).into_response())
}

async fn eval(State(svc): State<Arc<Service>>, Json(req): Json<EvalRequest>) -> ApiResult<Response> {
    let backend = Arc::clone(svc.backend());
    let out = blocking(move || evaluate(&req, backend.as_ref())).await?;
    Ok(Json(out).into_response())
}
