//! The JSON error envelope and the mapping from library errors to it.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use restbench_core::agents::AgentError;
use restbench_core::executor::ExecError;
use restbench_core::metrics::MetricError;
use restbench_core::spec_model::SpecError;
use restbench_core::workflow::{StoreError, WorkflowError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> ApiError {
        ApiError { code: code.into(), message: message.into(), details: None }
    }

    pub fn with_details(mut self, details: Value) -> ApiError {
        self.details = Some(details);
        self
    }

    pub fn not_found(kind: &str, id: &str) -> ApiError {
        ApiError::new("not_found", format!("{kind} {id} not found"))
    }

    pub fn validation(message: impl Into<String>) -> ApiError {
        ApiError::new("validation", message)
    }

    pub fn status(&self) -> StatusCode {
        match self.code.as_str() {
            "not_found" => StatusCode::NOT_FOUND,
            "stage_gate" | "illegal_transition" | "replay_in_progress" | "idempotency_conflict" => {
                StatusCode::CONFLICT
            }
            "validation" | "spec_invalid" => StatusCode::UNPROCESSABLE_ENTITY,
            "spec_unreachable" | "llm_error" | "agent_output_invalid" => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}

impl From<WorkflowError> for ApiError {
    fn from(e: WorkflowError) -> Self {
        let code = match &e {
            WorkflowError::NotFound { .. } => "not_found",
            WorkflowError::IllegalTransition { .. } => "illegal_transition",
            WorkflowError::StageGate(_) => "stage_gate",
            WorkflowError::Validation(_) => "validation",
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => ApiError::not_found("project", &id),
            StoreError::VersionMismatch { .. } => ApiError::validation(e.to_string()),
            other => ApiError::new("store_error", other.to_string()),
        }
    }
}

impl From<SpecError> for ApiError {
    fn from(e: SpecError) -> Self {
        let code = match e {
            SpecError::Unreachable { .. } => "spec_unreachable",
            _ => "spec_invalid",
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<ExecError> for ApiError {
    fn from(e: ExecError) -> Self {
        ApiError::new("runner_error", e.to_string())
    }
}

impl From<MetricError> for ApiError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::UnknownMetric(name) => ApiError::not_found("metric", &name),
            other => ApiError::new("metric_error", other.to_string()),
        }
    }
}

impl From<AgentError> for ApiError {
    fn from(e: AgentError) -> Self {
        let details = json!({
            "raw_completion": e.raw_completion(),
            "completion_id": e.completion_id(),
        });
        let code = match &e {
            AgentError::Precondition(_) | AgentError::PromptTooLarge { .. } | AgentError::UnknownChecker(_) => {
                "validation"
            }
            AgentError::Llm { .. } => "llm_error",
            AgentError::EmptyScenarioList { .. } | AgentError::EmptyCompletion { .. } | AgentError::Report { .. } => {
                "agent_output_invalid"
            }
            AgentError::Template(_) | AgentError::Audit(_) => "internal",
        };
        ApiError::new(code, e.to_string()).with_details(details)
    }
}
