//! Quality and adequacy metrics over a project: syntax and data-type
//! correctness, usability by edit distance, scenario, operation and status
//! code coverage.

mod levenshtein;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{round2, ScenarioKind};
use crate::spec_model::expected_status_codes;
use crate::workflow::{Project, Provenance, ReviewState};

pub use levenshtein::levenshtein;
pub use table::{render_table, ApiRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("{metric} is undefined: {reason}")]
    Undefined { metric: String, reason: String },
    #[error("{metric} is missing inputs for {ids:?}")]
    IncompleteInputs { metric: String, ids: Vec<String> },
    #[error("unknown metric {0}")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    /// Unrounded ratio, or an average distance for usability.
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
}

impl MetricValue {
    fn ratio(numerator: usize, denominator: usize) -> MetricValue {
        MetricValue {
            value: numerator as f64 / denominator as f64,
            numerator: numerator as f64,
            denominator: denominator as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub metric: String,
    /// Project id for API-level metrics, operation id for per-operation ones.
    pub scope: String,
    pub value: Option<f64>,
    pub numerator: Option<f64>,
    pub denominator: Option<f64>,
    pub undefined_reason: Option<String>,
    pub computed_at: DateTime<Utc>,
}

/// Facts about one script that the metrics read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptFacts {
    pub id: String,
    pub provenance: Provenance,
    pub is_final: bool,
    pub system: bool,
    pub original_text: Option<String>,
    pub final_text: String,
    pub original_syntax_valid: Option<bool>,
    /// Human-confirmed data-type verdict.
    pub data_type_valid: Option<bool>,
    pub operation_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFacts {
    pub id: String,
    pub kind: ScenarioKind,
    pub owner_operation: Option<String>,
    pub is_final: bool,
    /// LLM output accepted without modification.
    pub llm_unmodified: bool,
}

/// Id-level inputs of every metric, extracted from one project snapshot.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricInputs {
    pub api: String,
    pub operations: Vec<String>,
    pub scripts: Vec<ScriptFacts>,
    pub scenarios: Vec<ScenarioFacts>,
    pub expected_codes: BTreeMap<String, BTreeSet<String>>,
    pub received_codes: BTreeMap<String, BTreeSet<String>>,
}

impl MetricInputs {
    pub fn from_project(project: &Project) -> MetricInputs {
        let system_scenarios: BTreeSet<&str> = project
            .scenarios
            .iter()
            .filter(|s| s.kind == ScenarioKind::System)
            .map(|s| s.id.as_str())
            .collect();
        let scripts = project
            .scripts
            .iter()
            .map(|t| ScriptFacts {
                id: t.id.clone(),
                provenance: t.provenance,
                is_final: t.is_final(),
                system: system_scenarios.contains(t.scenario_id.as_str()),
                original_text: t.original_llm_text.clone(),
                final_text: t.current_text.clone(),
                original_syntax_valid: t.original_syntax_valid,
                data_type_valid: t.data_type_verdict.and_then(|v| v.confirmed),
                operation_ids: t.operation_ids.clone(),
            })
            .collect();
        let scenarios = project
            .scenarios
            .iter()
            .map(|s| ScenarioFacts {
                id: s.id.clone(),
                kind: s.kind,
                owner_operation: s.owner_operation.clone(),
                is_final: s.is_final(),
                llm_unmodified: s.is_llm_unmodified_accepted(),
            })
            .collect();

        let mut expected_codes = BTreeMap::new();
        let mut received_codes = BTreeMap::new();
        let finals: Vec<_> = project.scripts.iter().filter(|t| t.is_final()).collect();
        for op in &project.spec.operations {
            let expected = expected_status_codes(op).codes;
            let key = op.key();
            let mut captured: BTreeSet<String> = BTreeSet::new();
            for script in &finals {
                if let Some(codes) = project.latest_execution(script).and_then(|e| e.observed_status_codes.get(&key)) {
                    captured.extend(codes.iter().cloned());
                }
            }
            // Without captured traffic, fall back to the execution-results checker.
            if captured.is_empty() {
                for script in &finals {
                    if let Some(entry) = script.status_code_report.as_ref().and_then(|r| r.per_endpoint.get(&key)) {
                        captured.extend(entry.observed.iter().cloned());
                    }
                }
            }
            expected_codes.insert(op.id.clone(), expected);
            received_codes.insert(op.id.clone(), captured);
        }

        MetricInputs {
            api: project.id.clone(),
            operations: project.spec.operations.iter().map(|op| op.id.clone()).collect(),
            scripts,
            scenarios,
            expected_codes,
            received_codes,
        }
    }

    /// LLM-generated scripts that are still in use.
    pub fn t_llm(&self) -> impl Iterator<Item = &ScriptFacts> {
        self.scripts.iter().filter(|t| t.is_final && t.provenance != Provenance::Manual)
    }

    pub fn t_fin(&self) -> impl Iterator<Item = &ScriptFacts> {
        self.scripts.iter().filter(|t| t.is_final)
    }

    fn unit_final<'a>(&'a self, op: &'a str) -> impl Iterator<Item = &'a ScenarioFacts> {
        self.scenarios
            .iter()
            .filter(move |s| s.kind == ScenarioKind::Unit && s.is_final && s.owner_operation.as_deref() == Some(op))
    }
}

fn undefined(metric: &str, reason: &str) -> MetricError {
    MetricError::Undefined { metric: metric.into(), reason: reason.into() }
}

pub fn syntax_correctness(inputs: &MetricInputs) -> Result<MetricValue, MetricError> {
    let t_llm: Vec<&ScriptFacts> = inputs.t_llm().collect();
    if t_llm.is_empty() {
        return Err(undefined("Cor_Syn", "no LLM-generated scripts"));
    }
    let missing: Vec<String> =
        t_llm.iter().filter(|t| t.original_syntax_valid.is_none()).map(|t| t.id.clone()).collect();
    if !missing.is_empty() {
        return Err(MetricError::IncompleteInputs { metric: "Cor_Syn".into(), ids: missing });
    }
    let valid = t_llm.iter().filter(|t| t.original_syntax_valid == Some(true)).count();
    Ok(MetricValue::ratio(valid, t_llm.len()))
}

pub fn data_type_correctness(inputs: &MetricInputs) -> Result<MetricValue, MetricError> {
    let t_llm: Vec<&ScriptFacts> = inputs.t_llm().collect();
    if t_llm.is_empty() {
        return Err(undefined("Cor_DT", "no LLM-generated scripts"));
    }
    let missing: Vec<String> = t_llm.iter().filter(|t| t.data_type_valid.is_none()).map(|t| t.id.clone()).collect();
    if !missing.is_empty() {
        return Err(MetricError::IncompleteInputs { metric: "Cor_DT".into(), ids: missing });
    }
    let valid = t_llm.iter().filter(|t| t.data_type_valid == Some(true)).count();
    Ok(MetricValue::ratio(valid, t_llm.len()))
}

fn edit_distance_sum(inputs: &MetricInputs, metric: &str) -> Result<usize, MetricError> {
    let mut sum = 0;
    let mut unmapped = Vec::new();
    for t in inputs.t_llm() {
        match &t.original_text {
            Some(original) => sum += levenshtein(original, &t.final_text),
            None => unmapped.push(t.id.clone()),
        }
    }
    if unmapped.is_empty() {
        Ok(sum)
    } else {
        Err(MetricError::IncompleteInputs { metric: metric.into(), ids: unmapped })
    }
}

/// Summed edit distance over LLM scripts, divided by the number of final
/// scripts.
pub fn usability(inputs: &MetricInputs) -> Result<MetricValue, MetricError> {
    let finals = inputs.t_fin().count();
    if finals == 0 {
        return Err(undefined("Usability", "no final scripts"));
    }
    let sum = edit_distance_sum(inputs, "Usability")?;
    Ok(MetricValue { value: sum as f64 / finals as f64, numerator: sum as f64, denominator: finals as f64 })
}

/// Same sum divided by the number of LLM scripts only.
pub fn usability_strict(inputs: &MetricInputs) -> Result<MetricValue, MetricError> {
    let llm = inputs.t_llm().count();
    if llm == 0 {
        return Err(undefined("Usability_strict", "no LLM-generated scripts"));
    }
    let sum = edit_distance_sum(inputs, "Usability_strict")?;
    Ok(MetricValue { value: sum as f64 / llm as f64, numerator: sum as f64, denominator: llm as f64 })
}

pub fn unit_scenario_coverage(inputs: &MetricInputs, op: &str) -> Result<MetricValue, MetricError> {
    let finals: Vec<&ScenarioFacts> = inputs.unit_final(op).collect();
    if finals.is_empty() {
        return Err(undefined("Cov_US_op", "no final unit scenarios"));
    }
    let unmodified = finals.iter().filter(|s| s.llm_unmodified).count();
    Ok(MetricValue::ratio(unmodified, finals.len()))
}

pub fn unit_scenario_coverage_api(inputs: &MetricInputs) -> Result<MetricValue, MetricError> {
    let mut finals: BTreeSet<&str> = BTreeSet::new();
    let mut unmodified: BTreeSet<&str> = BTreeSet::new();
    for op in &inputs.operations {
        for s in inputs.unit_final(op) {
            finals.insert(&s.id);
            if s.llm_unmodified {
                unmodified.insert(&s.id);
            }
        }
    }
    if finals.is_empty() {
        return Err(undefined("Cov_US_api", "no final unit scenarios"));
    }
    Ok(MetricValue::ratio(unmodified.len(), finals.len()))
}

pub fn system_scenario_coverage(inputs: &MetricInputs) -> Result<MetricValue, MetricError> {
    let finals: Vec<&ScenarioFacts> =
        inputs.scenarios.iter().filter(|s| s.kind == ScenarioKind::System && s.is_final).collect();
    if finals.is_empty() {
        return Err(undefined("Cov_SS", "no final system scenarios"));
    }
    Ok(MetricValue::ratio(finals.iter().filter(|s| s.llm_unmodified).count(), finals.len()))
}

/// Operations contained in at least one final system-test script, over all
/// operations.
pub fn operation_coverage(inputs: &MetricInputs) -> Result<MetricValue, MetricError> {
    if inputs.operations.is_empty() {
        return Err(undefined("Cov_Ops", "the API has no operations"));
    }
    let covered: BTreeSet<&str> = inputs
        .t_fin()
        .filter(|t| t.system)
        .flat_map(|t| t.operation_ids.iter().map(String::as_str))
        .filter(|op| inputs.operations.iter().any(|o| o == op))
        .collect();
    Ok(MetricValue::ratio(covered.len(), inputs.operations.len()))
}

pub fn status_code_coverage(inputs: &MetricInputs, op: &str) -> Result<MetricValue, MetricError> {
    let expected = inputs.expected_codes.get(op).filter(|e| !e.is_empty()).ok_or_else(|| {
        undefined("Cov_SCode", "no enumerable status codes declared")
    })?;
    let received = inputs.received_codes.get(op).map(|r| r.intersection(expected).count()).unwrap_or(0);
    Ok(MetricValue::ratio(received, expected.len()))
}

/// Summed ratio over every operation with enumerable codes.
pub fn status_code_coverage_api(inputs: &MetricInputs) -> Result<MetricValue, MetricError> {
    let (mut received, mut expected) = (0, 0);
    for op in &inputs.operations {
        if let Ok(v) = status_code_coverage(inputs, op) {
            received += v.numerator as usize;
            expected += v.denominator as usize;
        }
    }
    if expected == 0 {
        return Err(undefined("Cov_SCode_api", "no enumerable status codes declared"));
    }
    Ok(MetricValue::ratio(received, expected))
}

/// Arithmetic mean rounded to 2 decimals.
pub fn mean_over_apis(values: &[f64]) -> Result<f64, MetricError> {
    if values.is_empty() {
        return Err(undefined("mean", "no values"));
    }
    Ok(round2(values.iter().sum::<f64>() / values.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricScope {
    Api,
    Operation,
}

pub trait Metric: Send + Sync {
    fn name(&self) -> &str;

    fn scope(&self) -> MetricScope;

    /// `operation` is set for per-operation metrics.
    fn compute(&self, inputs: &MetricInputs, operation: Option<&str>) -> Result<MetricValue, MetricError>;
}

type ApiFn = fn(&MetricInputs) -> Result<MetricValue, MetricError>;
type OpFn = fn(&MetricInputs, &str) -> Result<MetricValue, MetricError>;

struct ApiMetric(&'static str, ApiFn);

impl Metric for ApiMetric {
    fn name(&self) -> &str {
        self.0
    }

    fn scope(&self) -> MetricScope {
        MetricScope::Api
    }

    fn compute(&self, inputs: &MetricInputs, _operation: Option<&str>) -> Result<MetricValue, MetricError> {
        (self.1)(inputs)
    }
}

struct OpMetric(&'static str, OpFn);

impl Metric for OpMetric {
    fn name(&self) -> &str {
        self.0
    }

    fn scope(&self) -> MetricScope {
        MetricScope::Operation
    }

    fn compute(&self, inputs: &MetricInputs, operation: Option<&str>) -> Result<MetricValue, MetricError> {
        let op = operation.ok_or_else(|| undefined(self.0, "needs an operation"))?;
        (self.1)(inputs, op)
    }
}

/// Metrics registered by name; reports list them in registration order.
pub struct MetricRegistry {
    metrics: Vec<Arc<dyn Metric>>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        let mut registry = MetricRegistry { metrics: Vec::new() };
        registry.register(Arc::new(ApiMetric("Cor_Syn", syntax_correctness)));
        registry.register(Arc::new(ApiMetric("Cor_DT", data_type_correctness)));
        registry.register(Arc::new(ApiMetric("Usability", usability)));
        registry.register(Arc::new(ApiMetric("Usability_strict", usability_strict)));
        registry.register(Arc::new(OpMetric("Cov_US_op", unit_scenario_coverage)));
        registry.register(Arc::new(ApiMetric("Cov_US_api", unit_scenario_coverage_api)));
        registry.register(Arc::new(ApiMetric("Cov_SS", system_scenario_coverage)));
        registry.register(Arc::new(ApiMetric("Cov_Ops", operation_coverage)));
        registry.register(Arc::new(OpMetric("Cov_SCode", status_code_coverage)));
        registry.register(Arc::new(ApiMetric("Cov_SCode_api", status_code_coverage_api)));
        registry
    }
}

impl MetricRegistry {
    /// Adds a metric, replacing any with the same name.
    pub fn register(&mut self, metric: Arc<dyn Metric>) {
        self.metrics.retain(|m| m.name() != metric.name());
        self.metrics.push(metric);
    }

    pub fn names(&self) -> Vec<&str> {
        self.metrics.iter().map(|m| m.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Metric>, MetricError> {
        self.metrics
            .iter()
            .find(|m| m.name() == name)
            .cloned()
            .ok_or_else(|| MetricError::UnknownMetric(name.into()))
    }

    /// Every API-level metric for the project plus every per-operation
    /// metric for each operation (or only `only_operation`).
    pub fn compute_records(&self, inputs: &MetricInputs, only_operation: Option<&str>) -> Vec<MetricRecord> {
        let now = Utc::now();
        let record = |metric: &dyn Metric, scope: &str, op: Option<&str>| {
            let result = metric.compute(inputs, op);
            MetricRecord {
                metric: metric.name().to_string(),
                scope: scope.to_string(),
                value: result.as_ref().ok().map(|v| v.value),
                numerator: result.as_ref().ok().map(|v| v.numerator),
                denominator: result.as_ref().ok().map(|v| v.denominator),
                undefined_reason: result.err().map(|e| e.to_string()),
                computed_at: now,
            }
        };
        let mut out = Vec::new();
        for metric in &self.metrics {
            match metric.scope() {
                MetricScope::Api if only_operation.is_none() => out.push(record(metric.as_ref(), &inputs.api, None)),
                MetricScope::Api => {}
                MetricScope::Operation => {
                    for op in inputs.operations.iter().filter(|o| only_operation.is_none_or(|only| only == *o)) {
                        out.push(record(metric.as_ref(), op, Some(op)));
                    }
                }
            }
        }
        out
    }
}

/// Review state counts used by the scenario metrics, exposed for callers that
/// want the raw inputs beside the values.
pub fn scenario_state_counts(project: &Project) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for s in &project.scenarios {
        *out.entry(s.review_state.as_str()).or_insert(0) += 1;
    }
    for state in [ReviewState::Pending, ReviewState::Accepted, ReviewState::Rejected] {
        out.entry(state.as_str()).or_insert(0);
    }
    out
}
