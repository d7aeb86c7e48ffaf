//! Shared helpers: an in-process service answered by the items routing
//! table, and a JSON client over its router.
#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use restbench_server::config::ServerConfig;
use restbench_server::http::router;
use restbench_server::service::Service;
use restbench_testkit::fixtures;
use serde_json::Value;
use tower::ServiceExt;

pub struct App {
    pub router: Router,
    pub service: Arc<Service>,
}

pub fn app() -> App {
    app_with(ServerConfig::scripted(&fixtures::table_path("items.json")))
}

pub fn app_with(config: ServerConfig) -> App {
    let service = Arc::new(Service::from_config(&config).expect("service config"));
    App { router: router(service.clone()), service }
}

impl App {
    pub async fn send(&self, method: &str, uri: &str, body: Option<Value>, key: Option<&str>) -> (StatusCode, Value) {
        let mut request = Request::builder().method(method).uri(uri);
        if let Some(key) = key {
            request = request.header("idempotency-key", key);
        }
        let body = match body {
            Some(v) => Body::from(serde_json::to_vec(&v).unwrap()),
            None => Body::empty(),
        };
        let response = self.router.clone().oneshot(request.body(body).unwrap()).await.unwrap();
        let status = response.status();
        let bytes = axum::body::to_bytes(response.into_body(), usize::MAX).await.unwrap();
        let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
        (status, value)
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.send("GET", uri, None, None).await
    }

    pub async fn post(&self, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        self.send("POST", uri, body, None).await
    }

    /// POST that must succeed; returns the body.
    pub async fn ok(&self, uri: &str, body: Option<Value>) -> Value {
        let (status, value) = self.post(uri, body).await;
        assert!(status.is_success(), "POST {uri} -> {status}: {value}");
        value
    }

    /// Creates a project from the items spec file and returns its id.
    pub async fn items_project(&self) -> String {
        let source = fixtures::spec_path("items.json").display().to_string();
        self.ok("/projects", Some(serde_json::json!({ "source": source }))).await["id"].as_str().unwrap().to_string()
    }

    /// Operation id for a `METHOD /path` key.
    pub async fn op(&self, pid: &str, key: &str) -> String {
        let (_, project) = self.get(&format!("/projects/{pid}")).await;
        project["operations"]
            .as_array()
            .unwrap()
            .iter()
            .find(|o| o["key"] == key)
            .unwrap_or_else(|| panic!("no operation {key}"))["id"]
            .as_str()
            .unwrap()
            .to_string()
    }

    pub async fn unit_scenarios(&self, pid: &str, op: &str) -> Vec<String> {
        let value = self.ok(&format!("/projects/{pid}/operations/{op}:unit-scenarios?wait=true"), None).await;
        strings(&value["result"]["scenario_ids"])
    }
}

pub fn strings(value: &Value) -> Vec<String> {
    value.as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect()
}

pub fn python_available() -> bool {
    std::process::Command::new("python3")
        .args(["-c", "import pytest, requests"])
        .status()
        .is_ok_and(|s| s.success())
}
