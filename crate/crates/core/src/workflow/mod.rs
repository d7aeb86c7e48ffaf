//! Projects, the review state machine, stage gates, summaries, the entity
//! tree and persistence.

mod model;
mod store;
mod summary;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{CompletionRecord, GeneratedScript, ScenarioDraft, ScenarioKind};
use crate::executor::ExecutionResult;
use crate::spec_model::{render_operation_detail, ApiSpecification};

pub use model::{
    Actor, ArchivedText, Counters, DataTypeVerdict, LoggedAction, Project, Provenance, ReviewAction, ReviewState,
    ReviewVerb, ScenarioText, StoredCompletion, TestScenario, TestScript, SCHEMA_VERSION,
};
pub use store::{MemoryStore, ProjectStore, SqliteStore, StoreError, StoreFactory, StoreRegistry};
pub use summary::{
    build_tree, compute_summary, EntityNode, NodeType, OperationSummary, ScenarioSetSummary, ScenarioSummary,
    ScriptSetSummary, SpecSummary, SubjectRef, SummarySnapshot,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkflowError {
    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },
    #[error("cannot {verb} an entity that is {state}")]
    IllegalTransition { verb: &'static str, state: &'static str },
    #[error("{0}")]
    StageGate(String),
    #[error("{0}")]
    Validation(String),
}

fn verb_name(verb: ReviewVerb) -> &'static str {
    match verb {
        ReviewVerb::Accept => "accept",
        ReviewVerb::Reject => "reject",
        ReviewVerb::Revoke => "revoke",
        ReviewVerb::Edit => "edit",
        ReviewVerb::Add => "add",
    }
}

/// Next review state for `verb`, or an illegal-transition error naming the
/// current state. `add` creates entities and never applies to existing ones.
pub fn next_state(current: ReviewState, verb: ReviewVerb) -> Result<ReviewState, WorkflowError> {
    use ReviewState::*;
    match (verb, current) {
        (ReviewVerb::Accept | ReviewVerb::Edit, Pending | Accepted) => Ok(Accepted),
        (ReviewVerb::Reject, Pending | Accepted) => Ok(Rejected),
        (ReviewVerb::Revoke, Rejected) => Ok(Pending),
        _ => Err(WorkflowError::IllegalTransition { verb: verb_name(verb), state: current.as_str() }),
    }
}

/// What an admitted system draft carries besides its text.
#[derive(Debug, Clone, Default)]
pub struct AdmitExtras {
    pub operation_ids: Vec<String>,
    pub flags: Vec<String>,
    pub completion_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gate {
    GenerateScript,
    Execute,
    CheckDataType,
    CheckMethodCoverage,
    CheckStatusStatic,
    CheckStatusDynamic,
}

impl Project {
    pub fn new(id: impl Into<String>, spec: ApiSpecification) -> Project {
        Project {
            schema_version: SCHEMA_VERSION,
            id: id.into(),
            created_at: Utc::now(),
            spec,
            scenarios: Vec::new(),
            scripts: Vec::new(),
            executions: Vec::new(),
            completions: Vec::new(),
            actions: Vec::new(),
            metric_records: Vec::new(),
            counters: Counters::default(),
            settings: Default::default(),
        }
    }

    fn next_id(&mut self, prefix: char) -> String {
        let counter = match prefix {
            's' => &mut self.counters.scenario,
            't' => &mut self.counters.script,
            'e' => &mut self.counters.execution,
            'c' => &mut self.counters.completion,
            _ => &mut self.counters.action,
        };
        *counter += 1;
        format!("{}-{prefix}{}", self.id, counter)
    }

    pub fn scenario(&self, id: &str) -> Result<&TestScenario, WorkflowError> {
        self.scenarios
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| WorkflowError::NotFound { kind: "scenario", id: id.into() })
    }

    fn scenario_mut(&mut self, id: &str) -> Result<&mut TestScenario, WorkflowError> {
        self.scenarios
            .iter_mut()
            .find(|s| s.id == id)
            .ok_or_else(|| WorkflowError::NotFound { kind: "scenario", id: id.into() })
    }

    pub fn script(&self, id: &str) -> Result<&TestScript, WorkflowError> {
        self.scripts
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| WorkflowError::NotFound { kind: "script", id: id.into() })
    }

    pub fn script_mut(&mut self, id: &str) -> Result<&mut TestScript, WorkflowError> {
        self.scripts
            .iter_mut()
            .find(|s| s.id == id)
            .ok_or_else(|| WorkflowError::NotFound { kind: "script", id: id.into() })
    }

    pub fn execution(&self, id: &str) -> Result<&ExecutionResult, WorkflowError> {
        self.executions
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| WorkflowError::NotFound { kind: "execution", id: id.into() })
    }

    pub fn require_operation(&self, id: &str) -> Result<(), WorkflowError> {
        self.spec
            .operation(id)
            .map(|_| ())
            .ok_or_else(|| WorkflowError::NotFound { kind: "operation", id: id.into() })
    }

    pub fn scripts_of(&self, scenario_id: &str) -> impl Iterator<Item = &TestScript> {
        let scenario_id = scenario_id.to_string();
        self.scripts.iter().filter(move |s| s.scenario_id == scenario_id)
    }

    pub fn latest_execution(&self, script: &TestScript) -> Option<&ExecutionResult> {
        script.executions.last().and_then(|id| self.execution(id).ok())
    }

    /// Rendered details of the given operations, in spec order.
    pub fn operation_details(&self, operation_ids: &[String]) -> Vec<String> {
        self.spec
            .operations
            .iter()
            .filter(|op| operation_ids.contains(&op.id))
            .map(render_operation_detail)
            .collect()
    }

    /// Stores a completion record and returns its id.
    pub fn record_completion(&mut self, record: CompletionRecord) -> String {
        let id = self.next_id('c');
        self.completions.push(StoredCompletion { id: id.clone(), record });
        id
    }

    /// Turns drafts into pending, LLM-provenance scenarios. Unit drafts are
    /// owned by `owner_operation`; system drafts involve `extras` operations.
    pub fn admit_drafts(
        &mut self,
        drafts: &[ScenarioDraft],
        owner_operation: Option<&str>,
        extras: &[AdmitExtras],
    ) -> Result<Vec<String>, WorkflowError> {
        if let Some(op) = owner_operation {
            self.require_operation(op)?;
        }
        let now = Utc::now();
        let mut ids = Vec::with_capacity(drafts.len());
        for (i, draft) in drafts.iter().enumerate() {
            if draft.kind == ScenarioKind::Unit && owner_operation.is_none() {
                return Err(WorkflowError::Validation("unit scenarios need an owning operation".into()));
            }
            let extra = extras.get(i).cloned().unwrap_or_default();
            let operation_ids = match draft.kind {
                ScenarioKind::Unit => vec![owner_operation.unwrap_or_default().to_string()],
                ScenarioKind::System => extra.operation_ids,
            };
            let mut flags = extra.flags;
            let duplicate = self
                .scenarios
                .iter()
                .any(|s| s.kind == draft.kind && s.name == draft.name && s.description == draft.description);
            if duplicate {
                flags.push("identical to an existing scenario".into());
            }
            let id = self.next_id('s');
            self.scenarios.push(TestScenario {
                id: id.clone(),
                kind: draft.kind,
                owner_operation: owner_operation.filter(|_| draft.kind == ScenarioKind::Unit).map(String::from),
                operation_ids,
                name: draft.name.clone(),
                description: draft.description.clone(),
                original_llm_text: Some(ScenarioText { name: draft.name.clone(), description: draft.description.clone() }),
                provenance: Provenance::Llm,
                review_state: ReviewState::Pending,
                script_generated: false,
                flags,
                completion_id: extra.completion_id,
                archived: Vec::new(),
                created_at: now,
                updated_at: now,
            });
            ids.push(id);
        }
        Ok(ids)
    }

    /// A manually written scenario, accepted on creation.
    pub fn add_manual_scenario(
        &mut self,
        kind: ScenarioKind,
        owner_operation: Option<&str>,
        operation_ids: Vec<String>,
        name: &str,
        description: &str,
    ) -> Result<String, WorkflowError> {
        if name.trim().is_empty() || description.trim().is_empty() {
            return Err(WorkflowError::Validation("a scenario needs a name and a description".into()));
        }
        let operation_ids = match (kind, owner_operation) {
            (ScenarioKind::Unit, Some(op)) => {
                self.require_operation(op)?;
                vec![op.to_string()]
            }
            (ScenarioKind::Unit, None) => {
                return Err(WorkflowError::Validation("unit scenarios need an owning operation".into()))
            }
            (ScenarioKind::System, _) => {
                for op in &operation_ids {
                    self.require_operation(op)?;
                }
                operation_ids
            }
        };
        let now = Utc::now();
        let id = self.next_id('s');
        self.scenarios.push(TestScenario {
            id: id.clone(),
            kind,
            owner_operation: owner_operation.filter(|_| kind == ScenarioKind::Unit).map(String::from),
            operation_ids,
            name: name.to_string(),
            description: description.to_string(),
            original_llm_text: None,
            provenance: Provenance::Manual,
            review_state: ReviewState::Accepted,
            script_generated: false,
            flags: Vec::new(),
            completion_id: None,
            archived: Vec::new(),
            created_at: now,
            updated_at: now,
        });
        self.log_action(ReviewAction::new(id.clone(), ReviewVerb::Add), ReviewState::Accepted);
        Ok(id)
    }

    /// A manually written script for a scenario, accepted on creation.
    pub fn add_manual_script(
        &mut self,
        scenario_id: &str,
        text: &str,
        operation_ids: Vec<String>,
    ) -> Result<String, WorkflowError> {
        if text.trim().is_empty() {
            return Err(WorkflowError::Validation("script text is empty".into()));
        }
        let scenario = self.scenario(scenario_id)?;
        let operation_ids =
            if operation_ids.is_empty() { scenario.operation_ids.clone() } else { operation_ids };
        let host_url = self.spec.host_url.clone();
        let now = Utc::now();
        let id = self.next_id('t');
        self.scripts.push(TestScript {
            id: id.clone(),
            scenario_id: scenario_id.to_string(),
            original_llm_text: None,
            raw_completion: None,
            current_text: text.to_string(),
            provenance: Provenance::Manual,
            review_state: ReviewState::Accepted,
            syntax_valid: None,
            original_syntax_valid: None,
            operation_ids,
            host_url,
            needs_review: false,
            data_type_report: None,
            data_type_verdict: None,
            method_coverage_report: None,
            status_code_report: None,
            executions: Vec::new(),
            completion_id: None,
            archived: Vec::new(),
            created_at: now,
            updated_at: now,
        });
        self.log_action(ReviewAction::new(id.clone(), ReviewVerb::Add), ReviewState::Accepted);
        Ok(id)
    }

    fn log_action(&mut self, action: ReviewAction, resulting_state: ReviewState) {
        let id = self.next_id('a');
        self.actions.push(LoggedAction { id, action, resulting_state });
    }

    /// Applies accept, reject, revoke or edit to a scenario or script.
    pub fn apply_review(&mut self, action: ReviewAction) -> Result<ReviewState, WorkflowError> {
        if action.verb == ReviewVerb::Add {
            return Err(WorkflowError::Validation("use the add endpoints to create entities".into()));
        }
        if action.verb == ReviewVerb::Edit {
            let empty = action.edited_text.as_deref().is_none_or(|t| t.trim().is_empty());
            if empty {
                return Err(WorkflowError::Validation("edit needs non-empty replacement text".into()));
            }
            if action.edited_name.as_deref().is_some_and(|n| n.trim().is_empty()) {
                return Err(WorkflowError::Validation("scenario name cannot be empty".into()));
            }
        }
        let now = Utc::now();
        let state = if self.scenarios.iter().any(|s| s.id == action.target_id) {
            let scenario = self.scenario_mut(&action.target_id)?;
            let next = next_state(scenario.review_state, action.verb)?;
            if action.verb == ReviewVerb::Edit {
                scenario.archived.push(ArchivedText {
                    text: format!("{}\n{}", scenario.name, scenario.description),
                    replaced_at: now,
                });
                if let Some(name) = &action.edited_name {
                    scenario.name = name.clone();
                }
                scenario.description = action.edited_text.clone().unwrap_or_default();
                if scenario.provenance == Provenance::Llm {
                    scenario.provenance = Provenance::LlmEdited;
                }
            }
            scenario.review_state = next;
            scenario.updated_at = now;
            next
        } else {
            let script = self.script_mut(&action.target_id)?;
            let next = next_state(script.review_state, action.verb)?;
            if action.verb == ReviewVerb::Edit {
                let text = action.edited_text.clone().unwrap_or_default();
                script.archived.push(ArchivedText { text: std::mem::take(&mut script.current_text), replaced_at: now });
                script.current_text = text;
                script.syntax_valid = None;
                if script.provenance == Provenance::Llm {
                    script.provenance = Provenance::LlmEdited;
                }
            }
            script.review_state = next;
            script.updated_at = now;
            next
        };
        self.log_action(action, state);
        Ok(state)
    }

    /// Checks that `gate` may be passed for `target_id` (a scenario for
    /// script generation, a script otherwise). Never mutates.
    pub fn check_gate(&self, gate: &Gate, target_id: &str) -> Result<(), WorkflowError> {
        let gate_err = |msg: String| Err(WorkflowError::StageGate(msg));
        if *gate == Gate::GenerateScript {
            let scenario = self.scenario(target_id)?;
            if scenario.review_state != ReviewState::Accepted {
                return gate_err(format!(
                    "scenario {target_id} is {}; accept it before generating a script",
                    scenario.review_state.as_str()
                ));
            }
            return Ok(());
        }
        let script = self.script(target_id)?;
        match gate {
            Gate::Execute => {
                if script.review_state != ReviewState::Accepted {
                    return gate_err(format!(
                        "script {target_id} is {}; accept it before executing",
                        script.review_state.as_str()
                    ));
                }
                if script.syntax_valid != Some(true) {
                    return gate_err(format!("script {target_id} has not passed the syntax check"));
                }
            }
            Gate::CheckDataType | Gate::CheckMethodCoverage => {
                if script.syntax_valid != Some(true) {
                    return gate_err(format!("script {target_id} has not passed the syntax check"));
                }
            }
            Gate::CheckStatusStatic => match self.latest_execution(script) {
                None => return gate_err(format!("script {target_id} has not been executed")),
                Some(result) if !result.all_passed() => {
                    return gate_err(format!(
                        "script {target_id} has failing cases; use the execution-results check"
                    ))
                }
                Some(_) => {}
            },
            Gate::CheckStatusDynamic => match self.latest_execution(script) {
                None => return gate_err(format!("script {target_id} has not been executed")),
                Some(result) if result.all_passed() => {
                    return gate_err(format!("every case of script {target_id} passed; use the script check"))
                }
                Some(_) => {}
            },
            Gate::GenerateScript => unreachable!(),
        }
        Ok(())
    }

    /// Stores a generated script as pending review and marks its scenario
    /// reviewed. Passes the script-generation gate first.
    pub fn admit_script(&mut self, generated: GeneratedScript, completion_id: Option<String>) -> Result<String, WorkflowError> {
        self.check_gate(&Gate::GenerateScript, &generated.scenario_id)?;
        let now = Utc::now();
        let id = self.next_id('t');
        self.scripts.push(TestScript {
            id: id.clone(),
            scenario_id: generated.scenario_id.clone(),
            original_llm_text: Some(generated.script_text.clone()),
            raw_completion: Some(generated.raw_completion),
            current_text: generated.script_text,
            provenance: Provenance::Llm,
            review_state: ReviewState::Pending,
            syntax_valid: None,
            original_syntax_valid: None,
            operation_ids: generated.operation_ids,
            host_url: generated.host_url,
            needs_review: generated.needs_review,
            data_type_report: None,
            data_type_verdict: None,
            method_coverage_report: None,
            status_code_report: None,
            executions: Vec::new(),
            completion_id,
            archived: Vec::new(),
            created_at: now,
            updated_at: now,
        });
        let scenario = self.scenario_mut(&generated.scenario_id)?;
        scenario.script_generated = true;
        scenario.updated_at = now;
        Ok(id)
    }

    /// Records a syntax verdict for the script's current text, and for its
    /// original text when the two are identical.
    pub fn record_syntax(&mut self, script_id: &str, verdict: Option<bool>) -> Result<(), WorkflowError> {
        let script = self.script_mut(script_id)?;
        script.syntax_valid = verdict;
        if script.original_llm_text.as_deref() == Some(script.current_text.as_str()) {
            script.original_syntax_valid = verdict;
        }
        script.updated_at = Utc::now();
        Ok(())
    }

    pub fn record_original_syntax(&mut self, script_id: &str, verdict: Option<bool>) -> Result<(), WorkflowError> {
        self.script_mut(script_id)?.original_syntax_valid = verdict;
        Ok(())
    }

    pub fn next_execution_id(&mut self) -> String {
        self.next_id('e')
    }

    pub fn record_execution(&mut self, result: ExecutionResult) -> Result<(), WorkflowError> {
        let script = self.script_mut(&result.script_id)?;
        script.executions.push(result.id.clone());
        script.updated_at = Utc::now();
        self.executions.push(result);
        Ok(())
    }

    /// Human confirmation of the data-type checker's verdict.
    pub fn confirm_data_type(&mut self, script_id: &str, correct: bool) -> Result<(), WorkflowError> {
        let script = self.script_mut(script_id)?;
        match &mut script.data_type_verdict {
            Some(verdict) => verdict.confirmed = Some(correct),
            None => script.data_type_verdict = Some(DataTypeVerdict { proposed: correct, confirmed: Some(correct) }),
        }
        script.updated_at = Utc::now();
        Ok(())
    }

    /// JSON bundle holding the whole project.
    pub fn export_bundle(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("project serializes")
    }

    pub fn import_bundle(value: serde_json::Value) -> Result<Project, StoreError> {
        let version = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0);
        if version != u64::from(SCHEMA_VERSION) {
            return Err(StoreError::VersionMismatch { found: version as u32, expected: SCHEMA_VERSION });
        }
        serde_json::from_value(value).map_err(|e| StoreError::Corrupt(e.to_string()))
    }
}

#[cfg(test)]
mod tests;
