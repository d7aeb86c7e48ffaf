//! HTTP routes. Actions on an entity are written as a suffix on its id, e.g.
//! `POST /scenarios/p1-s2:accept` or `POST /scripts/p1-t1:execute`.
//!
//! Agent and runner work is started as a task: the response is `202` with
//! the task record, or the finished result when `?wait=true` is given.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, Request, State};
use axum::http::{HeaderMap, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use restbench_core::workflow::{ReviewAction, ReviewVerb, SubjectRef};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::service::{CheckKind, ManualScenario, Service, TaskKind};
use crate::tasks::TaskStatus;

const BODY_LIMIT: usize = 16 * 1024 * 1024;

enum Replay {
    InFlight { fingerprint: String },
    Done { fingerprint: String, status: StatusCode, body: Bytes },
}

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<Service>,
    replays: Arc<Mutex<HashMap<String, Replay>>>,
}

impl AppState {
    pub fn new(service: Arc<Service>) -> AppState {
        AppState { service, replays: Arc::new(Mutex::new(HashMap::new())) }
    }
}

pub fn router(service: Arc<Service>) -> Router {
    let state = AppState::new(service);
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/import", post(import_project))
        .route("/projects/{pid}", get(get_project).post(project_action))
        .route("/projects/{pid}/tree", get(tree))
        .route("/projects/{pid}/summary", get(summary))
        .route("/projects/{pid}/metrics", get(metrics))
        .route("/projects/{pid}/export", get(export))
        .route("/projects/{pid}/scenarios", get(list_scenarios).post(add_scenario))
        .route("/projects/{pid}/operations/{op}", post(operation_action))
        .route("/scenarios/{target}", get(get_scenario).post(scenario_action))
        .route("/scenarios/{target}/scripts", post(add_script))
        .route("/scripts/{target}", get(get_script).post(script_action))
        .route("/executions/{id}", get(get_execution))
        .route("/tasks/{id}", get(get_task))
        .layer(middleware::from_fn_with_state(state.clone(), idempotency))
        .with_state(state)
}

type ApiResult = Result<Response, ApiError>;

fn ok<T: serde::Serialize>(value: T) -> ApiResult {
    Ok(Json(value).into_response())
}

fn parse_body<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::validation(format!("invalid request body: {e}")))
}

/// Splits `p1-s2:accept` into the id and the action.
fn split_action(target: &str) -> Result<(&str, &str), ApiError> {
    target
        .split_once(':')
        .ok_or_else(|| ApiError::validation(format!("expected <id>:<action>, got {target}")))
}

#[derive(Debug, Default, Deserialize)]
struct TaskQuery {
    #[serde(default)]
    wait: bool,
    mode: Option<String>,
}

/// Starts `task` after checking its gate, so a refused task leaves no
/// trace.
async fn launch(state: &AppState, task: TaskKind, wait: bool) -> ApiResult {
    state.service.precheck(&task).await?;
    let service = state.service.clone();
    let (kind, target) = (task.name(), task.target().to_string());
    let (id, handle) = service.tasks.spawn(kind, &target, service.clone().run_task(task));
    if !wait {
        let record = service.tasks.get(&id).ok_or_else(|| ApiError::not_found("task", &id))?;
        return Ok((StatusCode::ACCEPTED, Json(record)).into_response());
    }
    let record = handle.await.map_err(|e| ApiError::new("internal", e.to_string()))?;
    match (record.status, record.error) {
        (TaskStatus::Failed, Some(mut error)) => {
            let mut details = error.details.take().unwrap_or_else(|| json!({}));
            details["task_id"] = json!(id);
            Err(error.with_details(details))
        }
        _ => ok(json!({ "task_id": id, "result": record.result })),
    }
}

async fn list_projects(State(state): State<AppState>) -> ApiResult {
    ok(state.service.list_projects().await?)
}

#[derive(Debug, Default, Deserialize)]
struct CreateProject {
    source: String,
}

async fn create_project(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let request: CreateProject = parse_body(&body)?;
    if request.source.trim().is_empty() {
        return Err(ApiError::validation("source must be a URL or a file path"));
    }
    let view = state.service.create_project(&request.source).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn import_project(State(state): State<AppState>, body: Bytes) -> ApiResult {
    let bundle: Value = parse_body(&body)?;
    let view = state.service.import(bundle).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_project(State(state): State<AppState>, Path(pid): Path<String>) -> ApiResult {
    ok(state.service.get_project(&pid).await?)
}

#[derive(Debug, Default, Deserialize)]
struct SystemRequest {
    #[serde(default)]
    operation_ids: Vec<String>,
}

/// `POST /projects/p1:system-scenarios`.
async fn project_action(
    State(state): State<AppState>,
    Path(target): Path<String>,
    Query(query): Query<TaskQuery>,
    body: Bytes,
) -> ApiResult {
    let (pid, action) = split_action(&target)?;
    match action {
        "system-scenarios" => {
            let request: SystemRequest = parse_body(&body)?;
            let task = TaskKind::SystemScenarios { project_id: pid.into(), operation_ids: request.operation_ids };
            launch(&state, task, query.wait).await
        }
        other => Err(ApiError::not_found("project action", other)),
    }
}

/// `POST /projects/p1/operations/op2:unit-scenarios`.
async fn operation_action(
    State(state): State<AppState>,
    Path((pid, target)): Path<(String, String)>,
    Query(query): Query<TaskQuery>,
) -> ApiResult {
    let (op, action) = split_action(&target)?;
    match action {
        "unit-scenarios" => {
            let task = TaskKind::UnitScenarios { project_id: pid, operation_id: op.into() };
            launch(&state, task, query.wait).await
        }
        other => Err(ApiError::not_found("operation action", other)),
    }
}

async fn tree(State(state): State<AppState>, Path(pid): Path<String>) -> ApiResult {
    ok(state.service.tree(&pid).await?)
}

#[derive(Debug, Default, Deserialize)]
struct SummaryQuery {
    operation: Option<String>,
    scenario: Option<String>,
}

async fn summary(State(state): State<AppState>, Path(pid): Path<String>, Query(q): Query<SummaryQuery>) -> ApiResult {
    let subject = match (q.operation, q.scenario) {
        (None, None) => SubjectRef::Spec,
        (Some(op), None) => SubjectRef::Operation(op),
        (None, Some(s)) => SubjectRef::Scenario(s),
        _ => return Err(ApiError::validation("give at most one of operation, scenario")),
    };
    ok(state.service.summary(&pid, &subject).await?)
}

#[derive(Debug, Default, Deserialize)]
struct MetricsQuery {
    operation: Option<String>,
    format: Option<String>,
}

async fn metrics(State(state): State<AppState>, Path(pid): Path<String>, Query(q): Query<MetricsQuery>) -> ApiResult {
    let report = state.service.metrics(&pid, q.operation.as_deref()).await?;
    match q.format.as_deref() {
        None | Some("json") => ok(report),
        Some("table") => Ok(report.table.into_response()),
        Some(other) => Err(ApiError::validation(format!("unknown format {other}"))),
    }
}

async fn export(State(state): State<AppState>, Path(pid): Path<String>) -> ApiResult {
    ok(state.service.export(&pid).await?)
}

async fn list_scenarios(State(state): State<AppState>, Path(pid): Path<String>) -> ApiResult {
    ok(state.service.scenarios(&pid).await?)
}

async fn add_scenario(State(state): State<AppState>, Path(pid): Path<String>, body: Bytes) -> ApiResult {
    let mut request: ManualScenario = parse_body(&body)?;
    request.project_id = pid;
    let outcome = state.service.add_scenario(request).await?;
    Ok((StatusCode::CREATED, Json(outcome)).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct ManualScript {
    text: String,
    #[serde(default)]
    operation_ids: Vec<String>,
}

async fn add_script(State(state): State<AppState>, Path(target): Path<String>, body: Bytes) -> ApiResult {
    let request: ManualScript = parse_body(&body)?;
    let outcome = state.service.add_script(&target, &request.text, request.operation_ids).await?;
    Ok((StatusCode::CREATED, Json(outcome)).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct ReviewBody {
    text: Option<String>,
    name: Option<String>,
}

fn review_verb(action: &str) -> Option<ReviewVerb> {
    match action {
        "accept" => Some(ReviewVerb::Accept),
        "reject" => Some(ReviewVerb::Reject),
        "revoke" => Some(ReviewVerb::Revoke),
        "edit" => Some(ReviewVerb::Edit),
        _ => None,
    }
}

async fn review(state: &AppState, id: &str, verb: ReviewVerb, body: &Bytes) -> ApiResult {
    let request: ReviewBody = parse_body(body)?;
    if verb == ReviewVerb::Edit && request.text.is_none() {
        return Err(ApiError::validation("edit needs the replacement text"));
    }
    let mut action = ReviewAction::new(id, verb);
    action.edited_text = request.text;
    action.edited_name = request.name;
    ok(state.service.review(action).await?)
}

async fn get_scenario(State(state): State<AppState>, Path(target): Path<String>) -> ApiResult {
    ok(state.service.scenario(&target).await?)
}

async fn scenario_action(
    State(state): State<AppState>,
    Path(target): Path<String>,
    Query(query): Query<TaskQuery>,
    body: Bytes,
) -> ApiResult {
    let (id, action) = split_action(&target)?;
    if let Some(verb) = review_verb(action) {
        return review(&state, id, verb, &body).await;
    }
    match action {
        "generate-script" => launch(&state, TaskKind::Script { scenario_id: id.into() }, query.wait).await,
        other => Err(ApiError::not_found("scenario action", other)),
    }
}

async fn get_script(State(state): State<AppState>, Path(target): Path<String>) -> ApiResult {
    ok(state.service.script(&target).await?)
}

#[derive(Debug, Default, Deserialize)]
struct Confirmation {
    correct: Option<bool>,
}

async fn script_action(
    State(state): State<AppState>,
    Path(target): Path<String>,
    Query(query): Query<TaskQuery>,
    body: Bytes,
) -> ApiResult {
    let (id, action) = split_action(&target)?;
    if let Some(verb) = review_verb(action) {
        return review(&state, id, verb, &body).await;
    }
    let check = |kind| TaskKind::Check { script_id: id.into(), kind };
    match action {
        "execute" => launch(&state, TaskKind::Execute { script_id: id.into() }, query.wait).await,
        "syntax-check" => ok(state.service.syntax_check(id).await?),
        "check-data-type" => launch(&state, check(CheckKind::DataType), query.wait).await,
        "check-method-coverage" => launch(&state, check(CheckKind::MethodCoverage), query.wait).await,
        "check-status-code" => {
            let kind = match query.mode.as_deref() {
                None => CheckKind::StatusCode,
                Some("static") => CheckKind::StatusCodeStatic,
                Some("dynamic") => CheckKind::StatusCodeDynamic,
                Some(other) => return Err(ApiError::validation(format!("unknown mode {other}"))),
            };
            launch(&state, check(kind), query.wait).await
        }
        "confirm-data-type" => {
            let request: Confirmation = parse_body(&body)?;
            let correct = request.correct.ok_or_else(|| ApiError::validation("correct must be true or false"))?;
            ok(state.service.confirm_data_type(id, correct).await?)
        }
        other => Err(ApiError::not_found("script action", other)),
    }
}

async fn get_execution(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(state.service.execution(&id).await?)
}

async fn get_task(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let record = state.service.tasks.get(&id).ok_or_else(|| ApiError::not_found("task", &id))?;
    ok(record)
}

/// Replays the stored response for a repeated `Idempotency-Key`. A key
/// reused with a different request is refused, as is one whose first request
/// is still running.
async fn idempotency(State(state): State<AppState>, request: Request, next: Next) -> Response {
    let key = request.headers().get("idempotency-key").and_then(|v| v.to_str().ok()).map(String::from);
    let key = match key {
        Some(key) if request.method() == Method::POST => key,
        _ => return next.run(request).await,
    };
    let (parts, body) = request.into_parts();
    let body = match axum::body::to_bytes(body, BODY_LIMIT).await {
        Ok(body) => body,
        Err(e) => return ApiError::validation(format!("cannot read request body: {e}")).into_response(),
    };
    let fingerprint = format!("{} {}\n{}", parts.method, parts.uri, String::from_utf8_lossy(&body));
    {
        let mut replays = state.replays.lock().unwrap();
        match replays.get(&key) {
            Some(Replay::InFlight { fingerprint: f } | Replay::Done { fingerprint: f, .. }) if *f != fingerprint => {
                return ApiError::new("idempotency_conflict", format!("key {key} was used for another request"))
                    .into_response();
            }
            Some(Replay::InFlight { .. }) => {
                return ApiError::new("replay_in_progress", format!("request with key {key} is still running"))
                    .into_response();
            }
            Some(Replay::Done { status, body, .. }) => {
                let mut headers = HeaderMap::new();
                headers.insert("content-type", "application/json".parse().unwrap());
                headers.insert("idempotent-replay", "true".parse().unwrap());
                return (*status, headers, body.clone()).into_response();
            }
            None => {
                replays.insert(key.clone(), Replay::InFlight { fingerprint: fingerprint.clone() });
            }
        }
    }
    let response = next.run(Request::from_parts(parts, Body::from(body))).await;
    let (parts, body) = response.into_parts();
    let body = axum::body::to_bytes(body, BODY_LIMIT).await.unwrap_or_default();
    let mut replays = state.replays.lock().unwrap();
    if parts.status.is_server_error() {
        // Let the client retry failures under the same key.
        replays.remove(&key);
    } else {
        replays.insert(key, Replay::Done { fingerprint, status: parts.status, body: body.clone() });
    }
    Response::from_parts(parts, Body::from(body))
}
