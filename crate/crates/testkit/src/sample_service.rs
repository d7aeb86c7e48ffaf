//! The items service described by `fixtures/specs/items.json`, with a fault
//! plan that makes chosen endpoints misbehave.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::fixtures;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Fault {
    /// A declared status that does not fit the request, body unchanged.
    WrongStatus { status: u16 },
    /// Drops a field from every object in the response body.
    SchemaViolation { drop_field: String },
    /// A status the endpoint does not declare.
    UndeclaredCode { status: u16 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultRule {
    pub method: String,
    /// Path template as declared, e.g. `/items/{itemId}`.
    pub path: String,
    pub fault: Fault,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FaultPlan {
    pub rules: Vec<FaultRule>,
}

impl FaultPlan {
    pub fn none() -> FaultPlan {
        FaultPlan::default()
    }

    pub fn with(mut self, method: &str, path: &str, fault: Fault) -> FaultPlan {
        self.rules.push(FaultRule { method: method.into(), path: path.into(), fault });
        self
    }

    fn find(&self, method: &Method, path: &str) -> Option<&Fault> {
        self.rules
            .iter()
            .find(|r| r.method.eq_ignore_ascii_case(method.as_str()) && r.path == path)
            .map(|r| &r.fault)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: i64,
    pub name: String,
    pub category: String,
}

fn seed_items() -> Vec<Item> {
    vec![
        Item { id: 1, name: "pen".into(), category: "office".into() },
        Item { id: 2, name: "apple".into(), category: "food".into() },
    ]
}

struct Inner {
    items: Vec<Item>,
    next_id: i64,
}

#[derive(Clone)]
struct AppState {
    inner: Arc<Mutex<Inner>>,
    plan: Arc<FaultPlan>,
    spec: Arc<Value>,
}

fn error(status: StatusCode, message: &str) -> (StatusCode, Value) {
    (status, json!({ "message": message }))
}

fn drop_field(body: &mut Value, field: &str) {
    match body {
        Value::Object(map) => {
            map.remove(field);
        }
        Value::Array(items) => items.iter_mut().for_each(|v| drop_field(v, field)),
        _ => {}
    }
}

/// Applies the fault planned for `(method, template)` to a conforming answer.
fn finish(state: &AppState, method: Method, template: &str, (status, mut body): (StatusCode, Value)) -> Response {
    let status = match state.plan.find(&method, template) {
        None => status,
        Some(Fault::WrongStatus { status }) | Some(Fault::UndeclaredCode { status }) => {
            StatusCode::from_u16(*status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR)
        }
        Some(Fault::SchemaViolation { drop_field: field }) => {
            drop_field(&mut body, field);
            status
        }
    };
    (status, Json(body)).into_response()
}

async fn list_items(State(state): State<AppState>, Query(query): Query<BTreeMap<String, String>>) -> Response {
    let answer = {
        let inner = state.inner.lock().unwrap();
        let items: Vec<&Item> = match query.get("category") {
            Some(c) => inner.items.iter().filter(|i| &i.category == c).collect(),
            None => inner.items.iter().collect(),
        };
        if query.contains_key("category") && items.is_empty() {
            error(StatusCode::NOT_FOUND, "unknown category")
        } else {
            (StatusCode::OK, json!(items))
        }
    };
    finish(&state, Method::GET, "/items", answer)
}

async fn create_item(State(state): State<AppState>, body: Option<Json<Value>>) -> Response {
    let answer = {
        let field = |name: &str| body.as_ref().and_then(|b| b.get(name)).and_then(Value::as_str).map(String::from);
        match (field("name"), field("category")) {
            (Some(name), Some(category)) if !name.is_empty() && !category.is_empty() => {
                let mut inner = state.inner.lock().unwrap();
                let item = Item { id: inner.next_id, name, category };
                inner.next_id += 1;
                inner.items.push(item.clone());
                (StatusCode::CREATED, json!(item))
            }
            _ => error(StatusCode::BAD_REQUEST, "name and category must be non-empty strings"),
        }
    };
    finish(&state, Method::POST, "/items", answer)
}

async fn get_item(State(state): State<AppState>, Path(raw): Path<String>) -> Response {
    let answer = {
        let inner = state.inner.lock().unwrap();
        match raw.parse::<i64>().ok().and_then(|id| inner.items.iter().find(|i| i.id == id)) {
            Some(item) => (StatusCode::OK, json!(item)),
            None => error(StatusCode::NOT_FOUND, "item not found"),
        }
    };
    finish(&state, Method::GET, "/items/{itemId}", answer)
}

async fn spec_document(State(state): State<AppState>) -> Json<Value> {
    Json(state.spec.as_ref().clone())
}

/// A running sample service. Dropping the handle without calling
/// [`SampleService::shutdown`] leaves the server task to end with the runtime.
pub struct SampleService {
    addr: SocketAddr,
    inner: Arc<Mutex<Inner>>,
    stop: Option<oneshot::Sender<()>>,
    task: Option<JoinHandle<()>>,
}

impl SampleService {
    /// Binds an ephemeral port on 127.0.0.1 and starts serving.
    pub async fn start(plan: FaultPlan) -> std::io::Result<SampleService> {
        Self::start_on("127.0.0.1:0".parse().unwrap(), plan).await
    }

    pub async fn start_on(addr: SocketAddr, plan: FaultPlan) -> std::io::Result<SampleService> {
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;
        let mut spec: Value = serde_json::from_str(&fixtures::spec_text("items.json")?)?;
        spec["host"] = json!(addr.to_string());
        let inner = Arc::new(Mutex::new(Inner { items: seed_items(), next_id: 3 }));
        let state = AppState { inner: inner.clone(), plan: Arc::new(plan), spec: Arc::new(spec) };
        let app = Router::new()
            .route("/items", get(list_items).post(create_item))
            .route("/items/{itemId}", get(get_item))
            .route("/spec.json", get(spec_document))
            .with_state(state);
        let (stop, stopped) = oneshot::channel::<()>();
        let task = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = stopped.await;
                })
                .await;
        });
        Ok(SampleService { addr, inner, stop: Some(stop), task: Some(task) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// URL of the service's own spec, with `host` set to this instance.
    pub fn spec_url(&self) -> String {
        format!("{}/spec.json", self.base_url())
    }

    /// Restores the seed data.
    pub fn reset(&self) {
        let mut inner = self.inner.lock().unwrap();
        inner.items = seed_items();
        inner.next_id = 3;
    }

    pub async fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        if let Some(task) = self.task.take() {
            let _ = task.await;
        }
    }
}
