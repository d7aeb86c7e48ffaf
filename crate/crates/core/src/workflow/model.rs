use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::agents::{
    CompletionRecord, DataTypeReport, MethodCoverageReport, ScenarioKind, StatusCodeReport,
};
use crate::executor::ExecutionResult;
use crate::metrics::MetricRecord;
use crate::spec_model::ApiSpecification;

/// Bumped whenever the persisted project layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Llm,
    LlmEdited,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewState {
    Pending,
    Accepted,
    Rejected,
}

impl ReviewState {
    pub fn as_str(self) -> &'static str {
        match self {
            ReviewState::Pending => "pending",
            ReviewState::Accepted => "accepted",
            ReviewState::Rejected => "rejected",
        }
    }
}

/// Text replaced by an edit, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchivedText {
    pub text: String,
    pub replaced_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioText {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestScenario {
    pub id: String,
    pub kind: ScenarioKind,
    /// The operation under test for unit scenarios.
    pub owner_operation: Option<String>,
    /// Operations the scenario involves: the owner for unit scenarios, the
    /// linked operations for system scenarios.
    pub operation_ids: Vec<String>,
    pub name: String,
    pub description: String,
    pub original_llm_text: Option<ScenarioText>,
    pub provenance: Provenance,
    pub review_state: ReviewState,
    pub script_generated: bool,
    /// Review hints raised when the scenario was admitted.
    pub flags: Vec<String>,
    pub completion_id: Option<String>,
    pub archived: Vec<ArchivedText>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl TestScenario {
    pub fn text(&self) -> ScenarioText {
        ScenarioText { name: self.name.clone(), description: self.description.clone() }
    }

    pub fn prompt_text(&self) -> String {
        crate::agents::scenario_prompt_text(&self.name, &self.description)
    }

    pub fn is_final(&self) -> bool {
        self.review_state != ReviewState::Rejected
    }

    /// Reviewed for progress: any review verb applied, or a script generated.
    pub fn is_reviewed(&self) -> bool {
        self.review_state != ReviewState::Pending || self.script_generated
    }

    /// LLM output accepted as-is.
    pub fn is_llm_unmodified_accepted(&self) -> bool {
        self.provenance == Provenance::Llm && self.review_state == ReviewState::Accepted
    }
}

/// A checker's proposed data-type verdict and the human confirmation of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataTypeVerdict {
    pub proposed: bool,
    pub confirmed: Option<bool>,
}

impl DataTypeVerdict {
    pub fn effective(&self) -> bool {
        self.confirmed.unwrap_or(self.proposed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestScript {
    pub id: String,
    pub scenario_id: String,
    pub original_llm_text: Option<String>,
    pub raw_completion: Option<String>,
    pub current_text: String,
    pub provenance: Provenance,
    pub review_state: ReviewState,
    /// Verdict on the current text; `None` when unknown.
    pub syntax_valid: Option<bool>,
    /// Verdict on the original model text.
    pub original_syntax_valid: Option<bool>,
    pub operation_ids: Vec<String>,
    pub host_url: String,
    pub needs_review: bool,
    pub data_type_report: Option<DataTypeReport>,
    pub data_type_verdict: Option<DataTypeVerdict>,
    pub method_coverage_report: Option<MethodCoverageReport>,
    pub status_code_report: Option<StatusCodeReport>,
    pub executions: Vec<String>,
    pub completion_id: Option<String>,
    pub archived: Vec<ArchivedText>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl TestScript {
    pub fn is_final(&self) -> bool {
        self.review_state != ReviewState::Rejected
    }

    pub fn is_reviewed(&self) -> bool {
        self.review_state != ReviewState::Pending
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewVerb {
    Accept,
    Reject,
    Revoke,
    Edit,
    Add,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    Human,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewAction {
    pub target_id: String,
    pub verb: ReviewVerb,
    /// Full replacement text for `edit`: the description of a scenario or the
    /// body of a script.
    #[serde(default)]
    pub edited_text: Option<String>,
    /// Optional new scenario name for `edit`.
    #[serde(default)]
    pub edited_name: Option<String>,
    pub actor: Actor,
    pub at: DateTime<Utc>,
}

impl ReviewAction {
    pub fn new(target_id: impl Into<String>, verb: ReviewVerb) -> Self {
        ReviewAction {
            target_id: target_id.into(),
            verb,
            edited_text: None,
            edited_name: None,
            actor: Actor::Human,
            at: Utc::now(),
        }
    }

    pub fn edit(target_id: impl Into<String>, text: impl Into<String>) -> Self {
        ReviewAction { edited_text: Some(text.into()), ..ReviewAction::new(target_id, ReviewVerb::Edit) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedAction {
    pub id: String,
    pub action: ReviewAction,
    /// State of the target after the action.
    pub resulting_state: ReviewState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredCompletion {
    pub id: String,
    pub record: CompletionRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub scenario: u64,
    pub script: u64,
    pub execution: u64,
    pub completion: u64,
    pub action: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub schema_version: u32,
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub spec: ApiSpecification,
    pub scenarios: Vec<TestScenario>,
    pub scripts: Vec<TestScript>,
    pub executions: Vec<ExecutionResult>,
    pub completions: Vec<StoredCompletion>,
    pub actions: Vec<LoggedAction>,
    pub metric_records: Vec<MetricRecord>,
    pub counters: Counters,
    /// Free-form settings recorded with the project, such as the model used.
    #[serde(default)]
    pub settings: BTreeMap<String, String>,
}
