#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use nodestory::{parse_graph, ScriptedBackend, StoryGraph};
use nodestory_service::{api, Service};
use serde_json::Value;
use tower::ServiceExt;

pub const LUMINA: &str = include_str!("../../../core/tests/fixtures/lumina.json");

pub fn lumina() -> StoryGraph {
    parse_graph(LUMINA).unwrap()
}

pub fn app(root: &std::path::Path, latency_ms: u64, workers: usize) -> (Arc<Service>, Router) {
    let backend = Arc::new(ScriptedBackend::new(5).with_latency(Duration::from_millis(latency_ms)));
    let svc = Arc::new(Service::new(root, backend, workers).unwrap());
    (Arc::clone(&svc), api::router(svc))
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub text: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("{e}: {}", self.text))
    }

    pub fn etag(&self) -> String {
        self.headers["etag"].to_str().unwrap().to_owned()
    }
}

pub async fn call(app: &Router, method: Method, uri: &str, headers: &[(&str, &str)], body: Option<String>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b)),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Reply {
        status,
        headers,
        text: String::from_utf8(bytes.to_vec()).unwrap(),
    }
}

/// Creates a project holding the fixture graph and returns its id.
pub async fn new_project(app: &Router) -> String {
    let body = format!(r#"{{"name": "demo", "graph": {LUMINA}}}"#);
    let r = call(app, Method::POST, "/projects", &[], Some(body)).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
    r.json()["project_id"].as_str().unwrap().to_owned()
}
