//! Library-level flow: a hand-written provider drives the agents, results
//! go through review into a project, and the project survives a sqlite store.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use restbench_core::agents::{AgentError, AgentSettings, Agents, CheckInput, CheckReport, MemoryAuditSink};
use restbench_core::llm::{
    Completion, CompletionProvider, DualRolePrompt, LlmConfig, LlmError, LlmGateway, TemplateName, TemplateStore,
};
use restbench_core::metrics::{MetricInputs, MetricRegistry};
use restbench_core::spec_model::parse_spec;
use restbench_core::workflow::{Project, ProjectStore, ReviewAction, ReviewVerb, SqliteStore};

const SPEC: &str = r##"{
  "swagger": "2.0",
  "info": {"title": "Notes", "version": "1"},
  "host": "notes.example",
  "basePath": "/v1",
  "schemes": ["https"],
  "paths": {
    "/notes": {
      "get": {"summary": "List notes", "responses": {"200": {"description": "ok"}}},
      "post": {
        "summary": "Create a note",
        "parameters": [{"name": "body", "in": "body", "required": true, "schema": {"$ref": "#/definitions/Note"}}],
        "responses": {"201": {"description": "created"}, "400": {"description": "bad"}}
      }
    }
  },
  "definitions": {"Note": {"type": "object", "properties": {"text": {"type": "string"}}}}
}"##;

const SCENARIOS: &str = "1. Scenario Name: List notes\n   Scenario Description: GET /notes returns 200.\n\
2. Scenario Name: Empty listing\n   Scenario Description: GET /notes on a new account returns an empty array.\n";

const SCRIPT: &str = "```python\nimport requests\n\nBASE = \"{host}\"\n\ndef test_list():\n    assert requests.get(BASE + \"/notes\").status_code == 200\n```";

/// Answers by template; fails for anything else.
struct Canned {
    calls: AtomicUsize,
}

#[async_trait]
impl CompletionProvider for Canned {
    fn name(&self) -> &str {
        "canned"
    }

    async fn complete(&self, prompt: &DualRolePrompt, config: &LlmConfig) -> Result<Completion, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = match prompt.template {
            TemplateName::GenerateTestScenario => SCENARIOS.to_string(),
            TemplateName::GenerateTestCase => SCRIPT.replace("{host}", &prompt.bindings_used["server_host"]),
            TemplateName::CheckMethodCoverage => {
                r#"{"coverage": 100, "expected": ["GET /notes"], "used_in_script": ["GET /notes"]}"#.to_string()
            }
            _ => return Err(LlmError::HttpStatus { status: 400, body: "unsupported".into() }),
        };
        Ok(Completion {
            text,
            model_name: config.model_name.clone(),
            latency_ms: 1,
            prompt_tokens: None,
            completion_tokens: None,
        })
    }
}

fn agents(settings: AgentSettings) -> (Agents, Arc<Canned>) {
    let provider = Arc::new(Canned { calls: AtomicUsize::new(0) });
    let gateway = LlmGateway::new(provider.clone(), LlmConfig::new("canned://", "canned", 0.0)).unwrap();
    (Agents::new(gateway, Arc::new(TemplateStore::shipped()), settings), provider)
}

#[tokio::test]
async fn generated_work_is_reviewed_stored_and_measured() {
    let spec = parse_spec(SPEC, "notes.json").unwrap();
    assert_eq!(spec.host_url, "https://notes.example/v1");
    let mut project = Project::new("p1", spec);
    let (agents, _) = agents(AgentSettings::default());
    let sink = MemoryAuditSink::default();

    let op = project.spec.operations[0].id.clone();
    let detail = project.operation_details(std::slice::from_ref(&op)).join("");
    let drafts = agents.generate_unit_scenarios(&detail, &sink).await.unwrap();
    let ids = project.admit_drafts(&drafts.value, Some(&op), &[]).unwrap();
    assert_eq!(ids.len(), 2);
    project.apply_review(ReviewAction::new(&ids[0], ReviewVerb::Accept)).unwrap();
    project.apply_review(ReviewAction::new(&ids[1], ReviewVerb::Reject)).unwrap();

    let scenario = project.scenario(&ids[0]).unwrap().clone();
    let host = project.spec.host_url.clone();
    let details = project.operation_details(&scenario.operation_ids);
    let script = agents
        .generate_test_script(&ids[0], &scenario.prompt_text(), &details, &scenario.operation_ids, &host, &sink)
        .await
        .unwrap();
    assert!(script.value.script_text.starts_with("import requests"));
    assert!(script.value.script_text.contains("https://notes.example/v1"));
    let tid = project.admit_script(script.value, Some(script.completion_id)).unwrap();
    project.record_syntax(&tid, Some(true)).unwrap();
    project.apply_review(ReviewAction::new(&tid, ReviewVerb::Accept)).unwrap();

    let input = CheckInput {
        scenario: scenario.prompt_text(),
        selected_apis: details.join(""),
        generated_script: Some(project.script(&tid).unwrap().current_text.clone()),
        execution_result: None,
        captured: None,
    };
    let CheckReport::MethodCoverage(report) = agents.run_check("method-coverage", &input, &sink).await.unwrap().value
    else {
        panic!("method-coverage checker returned another report")
    };
    assert_eq!(report.coverage_percent, Some(100.0));
    assert_eq!(sink.records().len(), 3);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("projects.db");
    SqliteStore::open(&path).unwrap().save(&project).unwrap();
    let reloaded = SqliteStore::open(&path).unwrap().load("p1").unwrap();
    assert_eq!(reloaded, project);

    let registry = MetricRegistry::default();
    let before = registry.compute_records(&MetricInputs::from_project(&project), None);
    let after = registry.compute_records(&MetricInputs::from_project(&reloaded), None);
    let strip = |rs: Vec<restbench_core::metrics::MetricRecord>| {
        rs.into_iter().map(|r| (r.metric, r.scope, r.value)).collect::<Vec<_>>()
    };
    let before = strip(before);
    assert_eq!(before, strip(after));
    let syn = before.iter().find(|(m, _, _)| m == "Cor_Syn").unwrap();
    assert_eq!(syn.2, Some(1.0));
}

#[tokio::test]
async fn provider_failures_are_audited() {
    let (agents, _) = agents(AgentSettings::default());
    let sink = MemoryAuditSink::default();
    let input = CheckInput {
        scenario: "Scenario Name: x\nScenario Description: y".into(),
        selected_apis: "URI path: /notes\nMethod: GET\n".into(),
        generated_script: Some("def test_x():\n    pass\n".into()),
        execution_result: None,
        captured: None,
    };
    let err = agents.run_check("data-type", &input, &sink).await.unwrap_err();
    assert!(matches!(err, AgentError::Llm { .. }), "{err:?}");
    let records = sink.records();
    assert_eq!(records.len(), 1);
    assert!(records[0].completion.is_none());
    assert!(records[0].error.as_deref().unwrap().contains("HTTP 400"));
}

#[tokio::test]
async fn prompts_over_budget_are_not_sent() {
    let (agents, provider) = agents(AgentSettings { prompt_char_budget: 10 });
    let sink = MemoryAuditSink::default();
    let err = agents.generate_unit_scenarios("URI path: /notes\nMethod: GET\n", &sink).await.unwrap_err();
    assert!(matches!(err, AgentError::PromptTooLarge { budget: 10, .. }), "{err:?}");
    assert_eq!(provider.calls.load(Ordering::SeqCst), 0);
    assert!(sink.records().is_empty());
}
