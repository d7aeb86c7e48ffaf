//! LLM-backed agents: scenario generators, the script generator and the
//! checkers. Agents return drafts and reports; admitting them into a project
//! is the workflow's job.

mod checkers;
mod reports;
mod scenarios;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{Completion, LlmError, LlmGateway, TemplateError, TemplateName, TemplateStore};
use crate::spec_model::ApiOperation;

pub use checkers::{
    CheckInput, CheckReport, Checker, CheckerRegistry, DataTypeChecker, DynamicStatusCodeChecker,
    MethodCoverageChecker, StaticStatusCodeChecker,
};
pub use reports::{
    normalize_endpoint_key, parse_data_type_report, parse_method_coverage_report, parse_status_code_report, percent,
    round2, strip_code_fence, DataTypeReport, EndpointStatusCoverage, EndpointTypeCoverage, MethodCoverageReport,
    ReportError, StatusCodeMode, StatusCodeReport, STATED_TOLERANCE,
};
pub use scenarios::{
    format_scenario_list, link_operations, parse_scenario_list, scenario_prompt_text, OperationLinks,
    ParsedScenarios, ScenarioDraft, ScenarioKind,
};

/// Separator between operation detail blocks bound into one prompt.
pub const DETAIL_SEPARATOR: &str = "\n\n";

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("prompt is {chars} characters, over the budget of {budget}; select fewer operations")]
    PromptTooLarge { chars: usize, budget: usize },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("completion failed: {error}")]
    Llm { error: LlmError, completion_id: String },
    #[error("empty scenario list")]
    EmptyScenarioList { raw: String, completion_id: String },
    #[error("completion is empty")]
    EmptyCompletion { completion_id: String },
    #[error("{error}")]
    Report { error: ReportError, completion_id: String },
    #[error("could not persist completion record: {0}")]
    Audit(String),
    #[error("unknown checker {0}")]
    UnknownChecker(String),
}

impl AgentError {
    /// Raw model text attached to the failure, when there is one.
    pub fn raw_completion(&self) -> Option<&str> {
        match self {
            AgentError::EmptyScenarioList { raw, .. } => Some(raw),
            AgentError::Report { error, .. } => Some(error.raw()),
            _ => None,
        }
    }

    pub fn completion_id(&self) -> Option<&str> {
        match self {
            AgentError::Llm { completion_id, .. }
            | AgentError::EmptyScenarioList { completion_id, .. }
            | AgentError::EmptyCompletion { completion_id }
            | AgentError::Report { completion_id, .. } => Some(completion_id),
            _ => None,
        }
    }
}

/// One prompt and what came back for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub template: TemplateName,
    pub prompt_hash: String,
    pub system_message: String,
    pub user_message: String,
    pub bindings: BTreeMap<String, String>,
    pub completion: Option<Completion>,
    pub error: Option<String>,
    pub requested_at: DateTime<Utc>,
}

/// Receives every completion record before its text is parsed.
#[async_trait]
pub trait AuditSink: Send + Sync {
    /// Persists the record and returns its id.
    async fn record(&self, record: CompletionRecord) -> Result<String, String>;
}

/// Keeps records in memory; ids are `c1`, `c2`, ...
#[derive(Default)]
pub struct MemoryAuditSink {
    records: Mutex<Vec<CompletionRecord>>,
}

impl MemoryAuditSink {
    pub fn records(&self) -> Vec<CompletionRecord> {
        self.records.lock().unwrap().clone()
    }
}

#[async_trait]
impl AuditSink for MemoryAuditSink {
    async fn record(&self, record: CompletionRecord) -> Result<String, String> {
        let mut records = self.records.lock().unwrap();
        records.push(record);
        Ok(format!("c{}", records.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AgentSettings {
    /// Largest rendered user message, in characters, that is sent.
    pub prompt_char_budget: usize,
}

impl Default for AgentSettings {
    fn default() -> Self {
        AgentSettings { prompt_char_budget: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOutput<T> {
    pub value: T,
    pub completion_id: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDraft {
    pub draft: ScenarioDraft,
    pub links: OperationLinks,
    /// Review hints, e.g. fewer than two calls named.
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedScript {
    pub raw_completion: String,
    pub script_text: String,
    pub scenario_id: String,
    pub operation_ids: Vec<String>,
    pub host_url: String,
    /// Set when the completion does not look like code.
    pub needs_review: bool,
}

pub struct Agents {
    gateway: LlmGateway,
    templates: Arc<TemplateStore>,
    checkers: Arc<CheckerRegistry>,
    settings: AgentSettings,
}

impl Agents {
    pub fn new(gateway: LlmGateway, templates: Arc<TemplateStore>, settings: AgentSettings) -> Self {
        Agents { gateway, templates, checkers: Arc::new(CheckerRegistry::default()), settings }
    }

    pub fn with_checkers(mut self, checkers: CheckerRegistry) -> Self {
        self.checkers = Arc::new(checkers);
        self
    }

    pub fn checkers(&self) -> &CheckerRegistry {
        &self.checkers
    }

    pub fn gateway(&self) -> &LlmGateway {
        &self.gateway
    }

    /// Renders, checks the budget, completes and records. Returns the raw
    /// text and the record id.
    async fn call(
        &self,
        template: TemplateName,
        bindings: BTreeMap<String, String>,
        sink: &dyn AuditSink,
    ) -> Result<(String, String, Vec<String>), AgentError> {
        let rendered = self.templates.render(template, &bindings)?;
        let prompt = rendered.prompt;
        let chars = prompt.user_message.chars().count();
        if chars > self.settings.prompt_char_budget {
            return Err(AgentError::PromptTooLarge { chars, budget: self.settings.prompt_char_budget });
        }
        let requested_at = Utc::now();
        let result = self.gateway.complete(&prompt).await;
        let record = CompletionRecord {
            template,
            prompt_hash: prompt.hash(),
            system_message: prompt.system_message.clone(),
            user_message: prompt.user_message.clone(),
            bindings: prompt.bindings_used.clone(),
            completion: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(ToString::to_string),
            requested_at,
        };
        let completion_id = sink.record(record).await.map_err(AgentError::Audit)?;
        match result {
            Ok(completion) => Ok((completion.text, completion_id, rendered.warnings)),
            Err(error) => Err(AgentError::Llm { error, completion_id }),
        }
    }

    pub async fn generate_unit_scenarios(
        &self,
        op_detail: &str,
        sink: &dyn AuditSink,
    ) -> Result<AgentOutput<Vec<ScenarioDraft>>, AgentError> {
        let bindings = BTreeMap::from([("selected_apis".to_string(), op_detail.to_string())]);
        let (raw, completion_id, mut warnings) =
            self.call(TemplateName::GenerateTestScenario, bindings, sink).await?;
        let parsed = parse_scenario_list(&raw, ScenarioKind::Unit);
        if parsed.drafts.is_empty() {
            return Err(AgentError::EmptyScenarioList { raw, completion_id });
        }
        warnings.extend(parsed.warnings);
        Ok(AgentOutput { value: parsed.drafts, completion_id, warnings })
    }

    /// `operations` are the candidates for linking each draft's description;
    /// normally the operations whose details were sent.
    pub async fn generate_system_scenarios(
        &self,
        op_details: &[String],
        operations: &[ApiOperation],
        sink: &dyn AuditSink,
    ) -> Result<AgentOutput<Vec<SystemDraft>>, AgentError> {
        if op_details.is_empty() {
            return Err(AgentError::Precondition("system scenarios need at least one operation".into()));
        }
        let bindings = BTreeMap::from([("selected_apis".to_string(), op_details.join(DETAIL_SEPARATOR))]);
        let (raw, completion_id, mut warnings) =
            self.call(TemplateName::GenerateSystemScenario, bindings, sink).await?;
        let parsed = parse_scenario_list(&raw, ScenarioKind::System);
        if parsed.drafts.is_empty() {
            return Err(AgentError::EmptyScenarioList { raw, completion_id });
        }
        warnings.extend(parsed.warnings);
        let drafts = parsed
            .drafts
            .into_iter()
            .map(|draft| {
                let links = link_operations(&draft.description, operations);
                let mut flags = Vec::new();
                if links.mentions < 2 {
                    flags.push(format!("names {} API call(s); at least two expected", links.mentions));
                }
                for mention in &links.ambiguous {
                    flags.push(format!("ambiguous operation reference {mention}"));
                }
                for mention in &links.unmatched {
                    flags.push(format!("unknown operation reference {mention}"));
                }
                SystemDraft { draft, links, flags }
            })
            .collect();
        Ok(AgentOutput { value: drafts, completion_id, warnings })
    }

    pub async fn generate_test_script(
        &self,
        scenario_id: &str,
        scenario_text: &str,
        op_details: &[String],
        operation_ids: &[String],
        host_url: &str,
        sink: &dyn AuditSink,
    ) -> Result<AgentOutput<GeneratedScript>, AgentError> {
        if op_details.is_empty() {
            return Err(AgentError::Precondition("script generation needs operation details".into()));
        }
        let bindings = BTreeMap::from([
            ("selected_apis".to_string(), op_details.join(DETAIL_SEPARATOR)),
            ("server_host".to_string(), host_url.to_string()),
            ("selected_scenarios".to_string(), scenario_text.to_string()),
        ]);
        let (raw, completion_id, mut warnings) = self.call(TemplateName::GenerateTestCase, bindings, sink).await?;
        let script_text = strip_code_fence(&raw).to_string();
        if script_text.trim().is_empty() {
            return Err(AgentError::EmptyCompletion { completion_id });
        }
        let needs_review = !looks_like_code(&script_text);
        if needs_review {
            warnings.push("completion does not look like a test script; review it".into());
        }
        Ok(AgentOutput {
            value: GeneratedScript {
                raw_completion: raw,
                script_text,
                scenario_id: scenario_id.to_string(),
                operation_ids: operation_ids.to_vec(),
                host_url: host_url.to_string(),
                needs_review,
            },
            completion_id,
            warnings,
        })
    }

    /// Runs the checker registered as `name`.
    pub async fn run_check(
        &self,
        name: &str,
        input: &CheckInput,
        sink: &dyn AuditSink,
    ) -> Result<AgentOutput<CheckReport>, AgentError> {
        let checker = self.checkers.get(name).ok_or_else(|| AgentError::UnknownChecker(name.to_string()))?;
        let bindings = checker.bindings(input).map_err(AgentError::Precondition)?;
        let (raw, completion_id, mut warnings) = self.call(checker.template(), bindings, sink).await?;
        let report = checker
            .parse(&raw, input)
            .map_err(|error| AgentError::Report { error, completion_id: completion_id.clone() })?;
        warnings.extend(report.warnings().iter().cloned());
        Ok(AgentOutput { value: report, completion_id, warnings })
    }
}

/// Cheap check that a completion is Python test code rather than prose.
pub fn looks_like_code(text: &str) -> bool {
    text.lines().any(|line| {
        let l = line.trim_start();
        l.starts_with("import ")
            || (l.starts_with("from ") && l.contains(" import "))
            || l.starts_with("def ")
            || l.starts_with("class ")
            || l.starts_with("assert ")
            || l.starts_with('@')
            || l.contains("requests.")
    })
}
