//! The workflow behind the HTTP routes. Each project is guarded by its own
//! lock so writes to one project are serialized; model and runner calls
//! happen outside the lock.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex as StdMutex};

use async_trait::async_trait;
use restbench_core::agents::{
    AgentError, AgentSettings, Agents, AuditSink, CheckInput, CheckReport, CompletionRecord, ScenarioKind,
    DETAIL_SEPARATOR,
};
use restbench_core::executor::{self, ExecutionRequest, ExecutionResult, RunnerConfig};
use restbench_core::llm::{LlmGateway, ProviderRegistry, ProviderSettings, TemplateStore};
use restbench_core::metrics::{render_table, ApiRow, MetricInputs, MetricRecord, MetricRegistry};
use restbench_core::spec_model::load_spec;
use restbench_core::workflow::{
    build_tree, compute_summary, AdmitExtras, DataTypeVerdict, EntityNode, Gate, Project, ProjectStore, ReviewAction,
    ReviewState, ReviewVerb, StoreRegistry, SubjectRef, SummarySnapshot, TestScenario, TestScript,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;

use crate::config::ServerConfig;
use crate::error::ApiError;
use crate::tasks::TaskRegistry;

type Shared = Arc<Mutex<Project>>;

/// Writes completion records into the project they were made for.
struct ProjectSink(Shared);

#[async_trait]
impl AuditSink for ProjectSink {
    async fn record(&self, record: CompletionRecord) -> Result<String, String> {
        Ok(self.0.lock().await.record_completion(record))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperationEntry {
    pub id: String,
    pub key: String,
    pub summary: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectView {
    pub id: String,
    pub title: String,
    pub source: String,
    pub host_url: String,
    pub warnings: Vec<String>,
    pub operations: Vec<OperationEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioView {
    pub scenario: TestScenario,
    /// The operation details bound into prompts about this scenario.
    pub operation_details: Vec<String>,
    pub script_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptView {
    pub script: TestScript,
    pub scenario_text: String,
    pub operation_details: Vec<String>,
    pub latest_execution: Option<ExecutionResult>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReviewOutcome {
    pub target_id: String,
    pub state: ReviewState,
    pub summary: SummarySnapshot,
    /// Completion of the tree node listing the target.
    pub node_completion_percent: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub scope: String,
    pub records: Vec<MetricRecord>,
    pub summary: SummarySnapshot,
    pub table: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    DataType,
    MethodCoverage,
    /// Static when every case of the latest execution passed, dynamic
    /// otherwise.
    StatusCode,
    StatusCodeStatic,
    StatusCodeDynamic,
}

impl CheckKind {
    pub fn parse(text: &str) -> Option<CheckKind> {
        serde_json::from_value(Value::String(text.to_string())).ok()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ManualScenario {
    pub project_id: String,
    pub kind: Option<ScenarioKind>,
    pub owner_operation: Option<String>,
    pub operation_ids: Vec<String>,
    pub name: String,
    pub description: String,
}

/// Project id embedded in an entity id such as `p1-s3`.
pub fn project_of(entity_id: &str) -> &str {
    entity_id.rsplit_once('-').map_or(entity_id, |(p, _)| p)
}

fn find_node<'a>(node: &'a EntityNode, id: &str) -> Option<&'a EntityNode> {
    if node.id == id {
        return Some(node);
    }
    node.children.iter().find_map(|c| find_node(c, id))
}

pub struct Service {
    store: Arc<dyn ProjectStore>,
    projects: StdMutex<BTreeMap<String, Shared>>,
    agents: Agents,
    runner: RunnerConfig,
    metrics: MetricRegistry,
    pub tasks: Arc<TaskRegistry>,
    create_lock: Mutex<()>,
}

impl Service {
    pub fn new(store: Arc<dyn ProjectStore>, agents: Agents, runner: RunnerConfig) -> Service {
        Service {
            store,
            projects: StdMutex::new(BTreeMap::new()),
            agents,
            runner,
            metrics: MetricRegistry::default(),
            tasks: Arc::new(TaskRegistry::default()),
            create_lock: Mutex::new(()),
        }
    }

    pub fn from_config(config: &ServerConfig) -> Result<Service, ApiError> {
        let mut providers = ProviderRegistry::default();
        restbench_testkit::responder::register(&mut providers);
        let provider = providers
            .build(&config.llm.provider, &ProviderSettings { options: config.llm.options.clone() })
            .map_err(|e| ApiError::validation(e.to_string()))?;
        let gateway = LlmGateway::new(provider, config.llm.model.clone().with_api_key_from_env())
            .map_err(|e| ApiError::validation(e.to_string()))?;
        config.runner.validate()?;
        let agents = Agents::new(gateway, Arc::new(TemplateStore::shipped()), config.agents.clone());
        let store = StoreRegistry::default().build(&config.store.kind, config.store.location.as_deref())?;
        Ok(Service::new(store, agents, config.runner.clone()))
    }

    pub fn agent_settings(&self) -> AgentSettings {
        AgentSettings::default()
    }

    async fn project(&self, id: &str) -> Result<Shared, ApiError> {
        if let Some(p) = self.projects.lock().unwrap().get(id) {
            return Ok(p.clone());
        }
        let loaded = Arc::new(Mutex::new(self.store.load(id)?));
        Ok(self.projects.lock().unwrap().entry(id.to_string()).or_insert(loaded).clone())
    }

    fn persist(&self, project: &Project) -> Result<(), ApiError> {
        Ok(self.store.save(project)?)
    }

    pub async fn list_projects(&self) -> Result<Vec<String>, ApiError> {
        Ok(self.store.list()?)
    }

    /// Loads a spec from a URL or file into a new project. Loading the same
    /// source twice gives two independent projects.
    pub async fn create_project(&self, source: &str) -> Result<ProjectView, ApiError> {
        let spec = load_spec(source).await?;
        let _guard = self.create_lock.lock().await;
        let next = self
            .store
            .list()?
            .iter()
            .filter_map(|id| id.strip_prefix('p').and_then(|n| n.parse::<u64>().ok()))
            .max()
            .unwrap_or(0)
            + 1;
        let project = Project::new(format!("p{next}"), spec);
        self.persist(&project)?;
        let view = project_view(&project);
        self.projects.lock().unwrap().insert(project.id.clone(), Arc::new(Mutex::new(project)));
        Ok(view)
    }

    pub async fn get_project(&self, id: &str) -> Result<ProjectView, ApiError> {
        Ok(project_view(&*self.project(id).await?.lock().await))
    }

    pub async fn tree(&self, id: &str) -> Result<EntityNode, ApiError> {
        Ok(build_tree(&*self.project(id).await?.lock().await))
    }

    pub async fn summary(&self, project_id: &str, subject: &SubjectRef) -> Result<SummarySnapshot, ApiError> {
        Ok(compute_summary(&*self.project(project_id).await?.lock().await, subject)?)
    }

    pub async fn scenarios(&self, project_id: &str) -> Result<Vec<TestScenario>, ApiError> {
        Ok(self.project(project_id).await?.lock().await.scenarios.clone())
    }

    pub async fn scenario(&self, id: &str) -> Result<ScenarioView, ApiError> {
        let shared = self.project(project_of(id)).await?;
        let p = shared.lock().await;
        let scenario = p.scenario(id)?.clone();
        Ok(ScenarioView {
            operation_details: p.operation_details(&scenario.operation_ids),
            script_ids: p.scripts_of(id).map(|t| t.id.clone()).collect(),
            scenario,
        })
    }

    pub async fn script(&self, id: &str) -> Result<ScriptView, ApiError> {
        let shared = self.project(project_of(id)).await?;
        let p = shared.lock().await;
        let script = p.script(id)?.clone();
        Ok(ScriptView {
            scenario_text: p.scenario(&script.scenario_id)?.prompt_text(),
            operation_details: p.operation_details(&script.operation_ids),
            latest_execution: p.latest_execution(&script).cloned(),
            script,
        })
    }

    pub async fn execution(&self, id: &str) -> Result<ExecutionResult, ApiError> {
        let shared = self.project(project_of(id)).await?;
        let p = shared.lock().await;
        Ok(p.execution(id)?.clone())
    }

    /// Checks that a task may start, without changing anything.
    pub async fn precheck(&self, task: &TaskKind) -> Result<(), ApiError> {
        match task {
            TaskKind::UnitScenarios { project_id, operation_id } => {
                self.project(project_id).await?.lock().await.require_operation(operation_id)?;
            }
            TaskKind::SystemScenarios { project_id, operation_ids } => {
                let shared = self.project(project_id).await?;
                let p = shared.lock().await;
                if operation_ids.is_empty() {
                    return Err(ApiError::validation("select at least one operation"));
                }
                for op in operation_ids {
                    p.require_operation(op)?;
                }
            }
            TaskKind::Script { scenario_id } => {
                let shared = self.project(project_of(scenario_id)).await?;
                shared.lock().await.check_gate(&Gate::GenerateScript, scenario_id)?;
            }
            TaskKind::Execute { script_id } => {
                let shared = self.project(project_of(script_id)).await?;
                shared.lock().await.check_gate(&Gate::Execute, script_id)?;
            }
            TaskKind::Check { script_id, kind } => {
                let shared = self.project(project_of(script_id)).await?;
                let p = shared.lock().await;
                p.check_gate(&check_gate(&p, script_id, *kind)?, script_id)?;
            }
        }
        Ok(())
    }

    pub async fn run_task(self: Arc<Self>, task: TaskKind) -> Result<Value, ApiError> {
        match task {
            TaskKind::UnitScenarios { project_id, operation_id } => {
                self.generate_unit_scenarios(&project_id, &operation_id).await
            }
            TaskKind::SystemScenarios { project_id, operation_ids } => {
                self.generate_system_scenarios(&project_id, &operation_ids).await
            }
            TaskKind::Script { scenario_id } => self.generate_script(&scenario_id).await,
            TaskKind::Execute { script_id } => self.execute(&script_id).await.map(|r| json!(r)),
            TaskKind::Check { script_id, kind } => self.check(&script_id, kind).await.map(|r| json!(r)),
        }
    }

    /// Persists after an agent call whether or not it succeeded, so failed
    /// completions stay in the audit trail.
    async fn finish_agent_call<T>(&self, shared: &Shared, result: Result<T, AgentError>) -> Result<T, ApiError> {
        if result.is_err() {
            self.persist(&*shared.lock().await)?;
        }
        result.map_err(ApiError::from)
    }

    pub async fn generate_unit_scenarios(&self, project_id: &str, operation_id: &str) -> Result<Value, ApiError> {
        let shared = self.project(project_id).await?;
        let detail = {
            let p = shared.lock().await;
            p.require_operation(operation_id)?;
            p.operation_details(&[operation_id.to_string()]).join(DETAIL_SEPARATOR)
        };
        let sink = ProjectSink(shared.clone());
        let result = self.agents.generate_unit_scenarios(&detail, &sink).await;
        let output = self.finish_agent_call(&shared, result).await?;
        let mut p = shared.lock().await;
        let extras: Vec<AdmitExtras> = output
            .value
            .iter()
            .map(|_| AdmitExtras { completion_id: Some(output.completion_id.clone()), ..Default::default() })
            .collect();
        let ids = p.admit_drafts(&output.value, Some(operation_id), &extras)?;
        self.persist(&p)?;
        Ok(json!({ "scenario_ids": ids, "completion_id": output.completion_id, "warnings": output.warnings }))
    }

    pub async fn generate_system_scenarios(&self, project_id: &str, operation_ids: &[String]) -> Result<Value, ApiError> {
        let shared = self.project(project_id).await?;
        let (details, operations) = {
            let p = shared.lock().await;
            for op in operation_ids {
                p.require_operation(op)?;
            }
            let ops: Vec<_> = p.spec.operations.iter().filter(|o| operation_ids.contains(&o.id)).cloned().collect();
            (p.operation_details(operation_ids), ops)
        };
        let sink = ProjectSink(shared.clone());
        let result = self.agents.generate_system_scenarios(&details, &operations, &sink).await;
        let output = self.finish_agent_call(&shared, result).await?;
        let mut p = shared.lock().await;
        let drafts: Vec<_> = output.value.iter().map(|d| d.draft.clone()).collect();
        let extras: Vec<AdmitExtras> = output
            .value
            .iter()
            .map(|d| AdmitExtras {
                operation_ids: d.links.operation_ids.clone(),
                flags: d.flags.clone(),
                completion_id: Some(output.completion_id.clone()),
            })
            .collect();
        let ids = p.admit_drafts(&drafts, None, &extras)?;
        self.persist(&p)?;
        Ok(json!({ "scenario_ids": ids, "completion_id": output.completion_id, "warnings": output.warnings }))
    }

    pub async fn generate_script(&self, scenario_id: &str) -> Result<Value, ApiError> {
        let shared = self.project(project_of(scenario_id)).await?;
        let (text, details, ops, host) = {
            let p = shared.lock().await;
            p.check_gate(&Gate::GenerateScript, scenario_id)?;
            let s = p.scenario(scenario_id)?;
            (s.prompt_text(), p.operation_details(&s.operation_ids), s.operation_ids.clone(), p.spec.host_url.clone())
        };
        let sink = ProjectSink(shared.clone());
        let result = self.agents.generate_test_script(scenario_id, &text, &details, &ops, &host, &sink).await;
        let output = self.finish_agent_call(&shared, result).await?;
        let verdict = executor::syntax_check(&output.value.script_text, &self.runner).await?;
        let mut p = shared.lock().await;
        let id = p.admit_script(output.value, Some(output.completion_id.clone()))?;
        p.record_syntax(&id, verdict.as_option())?;
        self.persist(&p)?;
        Ok(json!({
            "script_id": id,
            "syntax": verdict,
            "completion_id": output.completion_id,
            "warnings": output.warnings,
        }))
    }

    /// Applies a review verb. An edited script is syntax-checked again.
    pub async fn review(&self, action: ReviewAction) -> Result<ReviewOutcome, ApiError> {
        let target = action.target_id.clone();
        let shared = self.project(project_of(&target)).await?;
        let edited_script = action.verb == ReviewVerb::Edit && shared.lock().await.script(&target).is_ok();
        let verdict = match (&action.edited_text, edited_script) {
            (Some(text), true) => Some(executor::syntax_check(text, &self.runner).await?),
            _ => None,
        };
        let mut p = shared.lock().await;
        let state = p.apply_review(action)?;
        if let Some(verdict) = verdict {
            p.record_syntax(&target, verdict.as_option())?;
        }
        self.persist(&p)?;
        review_outcome(&p, &target, state)
    }

    pub async fn add_scenario(&self, request: ManualScenario) -> Result<ReviewOutcome, ApiError> {
        let shared = self.project(&request.project_id).await?;
        let mut p = shared.lock().await;
        let kind = request.kind.unwrap_or(if request.owner_operation.is_some() {
            ScenarioKind::Unit
        } else {
            ScenarioKind::System
        });
        let id = p.add_manual_scenario(
            kind,
            request.owner_operation.as_deref(),
            request.operation_ids,
            &request.name,
            &request.description,
        )?;
        self.persist(&p)?;
        review_outcome(&p, &id, ReviewState::Accepted)
    }

    pub async fn add_script(
        &self,
        scenario_id: &str,
        text: &str,
        operation_ids: Vec<String>,
    ) -> Result<ReviewOutcome, ApiError> {
        let verdict = executor::syntax_check(text, &self.runner).await?;
        let shared = self.project(project_of(scenario_id)).await?;
        let mut p = shared.lock().await;
        let id = p.add_manual_script(scenario_id, text, operation_ids)?;
        p.record_syntax(&id, verdict.as_option())?;
        self.persist(&p)?;
        review_outcome(&p, &id, ReviewState::Accepted)
    }

    pub async fn syntax_check(&self, script_id: &str) -> Result<Value, ApiError> {
        let shared = self.project(project_of(script_id)).await?;
        let text = shared.lock().await.script(script_id)?.current_text.clone();
        let verdict = executor::syntax_check(&text, &self.runner).await?;
        let mut p = shared.lock().await;
        p.record_syntax(script_id, verdict.as_option())?;
        self.persist(&p)?;
        Ok(json!({ "script_id": script_id, "syntax": verdict }))
    }

    pub async fn execute(&self, script_id: &str) -> Result<ExecutionResult, ApiError> {
        let shared = self.project(project_of(script_id)).await?;
        let (execution_id, text, spec) = {
            let mut p = shared.lock().await;
            p.check_gate(&Gate::Execute, script_id)?;
            let text = p.script(script_id)?.current_text.clone();
            (p.next_execution_id(), text, p.spec.clone())
        };
        let request = ExecutionRequest {
            execution_id,
            script_id: script_id.to_string(),
            script_text: &text,
            spec: &spec,
        };
        let result = executor::execute(request, &self.runner).await;
        let mut p = shared.lock().await;
        let result = match result {
            Ok(result) => result,
            Err(e) => {
                // The execution id was consumed; keep the counter persisted.
                self.persist(&p)?;
                return Err(e.into());
            }
        };
        p.record_execution(result.clone())?;
        self.persist(&p)?;
        Ok(result)
    }

    pub async fn check(&self, script_id: &str, kind: CheckKind) -> Result<CheckReport, ApiError> {
        let shared = self.project(project_of(script_id)).await?;
        let (checker, input) = {
            let p = shared.lock().await;
            let gate = check_gate(&p, script_id, kind)?;
            p.check_gate(&gate, script_id)?;
            let script = p.script(script_id)?;
            let scenario = p.scenario(&script.scenario_id)?;
            let latest = p.latest_execution(script);
            let dynamic = gate == Gate::CheckStatusDynamic;
            let checker = match gate {
                Gate::CheckDataType => "data-type",
                Gate::CheckMethodCoverage => "method-coverage",
                Gate::CheckStatusStatic => "status-code-static",
                _ => "status-code-dynamic",
            };
            let input = CheckInput {
                scenario: scenario.prompt_text(),
                selected_apis: p.operation_details(&script.operation_ids).join(DETAIL_SEPARATOR),
                generated_script: Some(script.current_text.clone()),
                execution_result: latest.filter(|_| dynamic).map(|e| e.summary_text()),
                captured: latest.filter(|_| dynamic).map(|e| e.observed_status_codes.clone()),
            };
            (checker, input)
        };
        let sink = ProjectSink(shared.clone());
        let result = self.agents.run_check(checker, &input, &sink).await;
        let output = self.finish_agent_call(&shared, result).await?;
        let mut p = shared.lock().await;
        let script = p.script_mut(script_id)?;
        match &output.value {
            CheckReport::DataType(report) => {
                script.data_type_verdict =
                    Some(DataTypeVerdict { proposed: report.proposes_correct(), confirmed: None });
                script.data_type_report = Some(report.clone());
            }
            CheckReport::MethodCoverage(report) => script.method_coverage_report = Some(report.clone()),
            CheckReport::StatusCode(report) => script.status_code_report = Some(report.clone()),
        }
        self.persist(&p)?;
        Ok(output.value)
    }

    pub async fn confirm_data_type(&self, script_id: &str, correct: bool) -> Result<Value, ApiError> {
        let shared = self.project(project_of(script_id)).await?;
        let mut p = shared.lock().await;
        p.confirm_data_type(script_id, correct)?;
        self.persist(&p)?;
        Ok(json!({ "script_id": script_id, "verdict": p.script(script_id)?.data_type_verdict }))
    }

    /// Metric records and the matching summary for a project or one of its
    /// operations. Undefined metrics are reported per record.
    pub async fn metrics(&self, project_id: &str, operation_id: Option<&str>) -> Result<MetricReport, ApiError> {
        let shared = self.project(project_id).await?;
        let p = shared.lock().await;
        let subject = match operation_id {
            Some(op) => SubjectRef::Operation(op.to_string()),
            None => SubjectRef::Spec,
        };
        let summary = compute_summary(&p, &subject)?;
        let inputs = MetricInputs::from_project(&p);
        let records = self.metrics.compute_records(&inputs, operation_id);
        let row = ApiRow {
            api: p.spec.title.clone(),
            values: records.iter().filter(|r| r.scope == p.id).map(|r| (r.metric.clone(), r.value)).collect(),
        };
        let names: Vec<&str> = self.metrics.names();
        let table = render_table(&[row], &names);
        Ok(MetricReport {
            scope: operation_id.unwrap_or(project_id).to_string(),
            records,
            summary,
            table,
        })
    }

    /// The whole project with freshly computed metric records.
    pub async fn export(&self, project_id: &str) -> Result<Value, ApiError> {
        let shared = self.project(project_id).await?;
        let mut p = shared.lock().await.clone();
        p.metric_records = self.metrics.compute_records(&MetricInputs::from_project(&p), None);
        Ok(p.export_bundle())
    }

    /// Stores an exported bundle under a fresh project id.
    pub async fn import(&self, bundle: Value) -> Result<ProjectView, ApiError> {
        let project = Project::import_bundle(bundle)?;
        if self.store.list()?.contains(&project.id) {
            return Err(ApiError::new("stage_gate", format!("project {} already exists", project.id)));
        }
        self.persist(&project)?;
        let view = project_view(&project);
        self.projects.lock().unwrap().insert(project.id.clone(), Arc::new(Mutex::new(project)));
        Ok(view)
    }

    /// Snapshot of the stored project, for comparisons in tests.
    pub async fn stored_project(&self, project_id: &str) -> Result<Project, ApiError> {
        Ok(self.store.load(project_id)?)
    }
}

/// Work that runs as a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum TaskKind {
    UnitScenarios { project_id: String, operation_id: String },
    SystemScenarios { project_id: String, operation_ids: Vec<String> },
    Script { scenario_id: String },
    Execute { script_id: String },
    Check { script_id: String, kind: CheckKind },
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::UnitScenarios { .. } => "unit-scenarios",
            TaskKind::SystemScenarios { .. } => "system-scenarios",
            TaskKind::Script { .. } => "script",
            TaskKind::Execute { .. } => "execute",
            TaskKind::Check { .. } => "check",
        }
    }

    pub fn target(&self) -> &str {
        match self {
            TaskKind::UnitScenarios { operation_id, .. } => operation_id,
            TaskKind::SystemScenarios { project_id, .. } => project_id,
            TaskKind::Script { scenario_id } => scenario_id,
            TaskKind::Execute { script_id } | TaskKind::Check { script_id, .. } => script_id,
        }
    }
}

fn check_gate(p: &Project, script_id: &str, kind: CheckKind) -> Result<Gate, ApiError> {
    Ok(match kind {
        CheckKind::DataType => Gate::CheckDataType,
        CheckKind::MethodCoverage => Gate::CheckMethodCoverage,
        CheckKind::StatusCodeStatic => Gate::CheckStatusStatic,
        CheckKind::StatusCodeDynamic => Gate::CheckStatusDynamic,
        CheckKind::StatusCode => {
            let script = p.script(script_id)?;
            match p.latest_execution(script) {
                None => {
                    return Err(ApiError::new("stage_gate", format!("script {script_id} has not been executed")))
                }
                Some(e) if e.all_passed() => Gate::CheckStatusStatic,
                Some(_) => Gate::CheckStatusDynamic,
            }
        }
    })
}

fn project_view(p: &Project) -> ProjectView {
    ProjectView {
        id: p.id.clone(),
        title: p.spec.title.clone(),
        source: p.spec.source.clone(),
        host_url: p.spec.host_url.clone(),
        warnings: p.spec.warnings.clone(),
        operations: p
            .spec
            .operations
            .iter()
            .map(|o| OperationEntry { id: o.id.clone(), key: o.key(), summary: o.summary.clone() })
            .collect(),
    }
}

fn review_outcome(p: &Project, target: &str, state: ReviewState) -> Result<ReviewOutcome, ApiError> {
    let (subject, node_id) = match p.scenario(target) {
        Ok(s) => match (&s.kind, &s.owner_operation) {
            (ScenarioKind::Unit, Some(op)) => (SubjectRef::Operation(op.clone()), format!("unit:{op}")),
            _ => (SubjectRef::Spec, format!("system:{}", p.id)),
        },
        Err(_) => {
            let script = p.script(target)?;
            (SubjectRef::Scenario(script.scenario_id.clone()), format!("scripts:{}", script.scenario_id))
        }
    };
    let tree = build_tree(p);
    Ok(ReviewOutcome {
        target_id: target.to_string(),
        state,
        summary: compute_summary(p, &subject)?,
        node_completion_percent: find_node(&tree, &node_id).map(|n| n.completion_percent),
    })
}
