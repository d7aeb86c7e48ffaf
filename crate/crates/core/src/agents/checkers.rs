//! The checker agents, registered by name so the service can select them from
//! a request path.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::reports::{
    parse_data_type_report, parse_method_coverage_report, parse_status_code_report, DataTypeReport,
    MethodCoverageReport, ReportError, StatusCodeMode, StatusCodeReport,
};
use crate::llm::TemplateName;

/// Everything a checker prompt may bind. Which fields are needed depends on
/// the checker's template.
#[derive(Debug, Clone, Default)]
pub struct CheckInput {
    pub scenario: String,
    pub selected_apis: String,
    pub generated_script: Option<String>,
    pub execution_result: Option<String>,
    /// Status codes captured per `"METHOD /path"` during execution.
    pub captured: Option<BTreeMap<String, BTreeSet<String>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CheckReport {
    DataType(DataTypeReport),
    MethodCoverage(MethodCoverageReport),
    StatusCode(StatusCodeReport),
}

impl CheckReport {
    pub fn warnings(&self) -> &[String] {
        match self {
            CheckReport::DataType(r) => &r.warnings,
            CheckReport::MethodCoverage(r) => &r.warnings,
            CheckReport::StatusCode(r) => &r.warnings,
        }
    }

    pub fn coverage_percent(&self) -> Option<f64> {
        match self {
            CheckReport::DataType(r) => Some(r.coverage_percent),
            CheckReport::MethodCoverage(r) => r.coverage_percent,
            CheckReport::StatusCode(r) => r.coverage_percent,
        }
    }
}

pub trait Checker: Send + Sync {
    fn name(&self) -> &str;

    fn template(&self) -> TemplateName;

    /// Binds the template's variables from `input`, failing on the first one
    /// the input cannot supply.
    fn bindings(&self, input: &CheckInput) -> Result<BTreeMap<String, String>, String> {
        let mut out = BTreeMap::new();
        for var in self.template().variables() {
            let value = match *var {
                "scenario" => Some(input.scenario.clone()),
                "selected_apis" => Some(input.selected_apis.clone()),
                "generated_script" => input.generated_script.clone(),
                "execution_result" => input.execution_result.clone(),
                _ => None,
            };
            let value = value.ok_or_else(|| format!("{} needs {var}", self.name()))?;
            out.insert(var.to_string(), value);
        }
        Ok(out)
    }

    fn parse(&self, raw: &str, input: &CheckInput) -> Result<CheckReport, ReportError>;
}

pub struct DataTypeChecker;

impl Checker for DataTypeChecker {
    fn name(&self) -> &str {
        "data-type"
    }

    fn template(&self) -> TemplateName {
        TemplateName::CheckParameterTypeCorrectness
    }

    fn parse(&self, raw: &str, _input: &CheckInput) -> Result<CheckReport, ReportError> {
        parse_data_type_report(raw).map(CheckReport::DataType)
    }
}

pub struct MethodCoverageChecker;

impl Checker for MethodCoverageChecker {
    fn name(&self) -> &str {
        "method-coverage"
    }

    fn template(&self) -> TemplateName {
        TemplateName::CheckMethodCoverage
    }

    fn parse(&self, raw: &str, _input: &CheckInput) -> Result<CheckReport, ReportError> {
        parse_method_coverage_report(raw).map(CheckReport::MethodCoverage)
    }
}

/// Status codes asserted in the script; used when every case passed.
pub struct StaticStatusCodeChecker;

impl Checker for StaticStatusCodeChecker {
    fn name(&self) -> &str {
        "status-code-static"
    }

    fn template(&self) -> TemplateName {
        TemplateName::CheckStatusCodeCoverageByScript
    }

    fn parse(&self, raw: &str, _input: &CheckInput) -> Result<CheckReport, ReportError> {
        parse_status_code_report(raw, StatusCodeMode::Static).map(CheckReport::StatusCode)
    }
}

/// Status codes returned during execution; used when some case failed.
/// Captured responses, when present, replace the model's observed lists.
pub struct DynamicStatusCodeChecker;

impl Checker for DynamicStatusCodeChecker {
    fn name(&self) -> &str {
        "status-code-dynamic"
    }

    fn template(&self) -> TemplateName {
        TemplateName::CheckStatusCodeCoverageByExecutionResults
    }

    fn parse(&self, raw: &str, input: &CheckInput) -> Result<CheckReport, ReportError> {
        let mut report = parse_status_code_report(raw, StatusCodeMode::Dynamic)?;
        if let Some(captured) = &input.captured {
            report.apply_captured(captured);
        }
        Ok(CheckReport::StatusCode(report))
    }
}

pub struct CheckerRegistry {
    checkers: BTreeMap<String, Arc<dyn Checker>>,
}

impl Default for CheckerRegistry {
    fn default() -> Self {
        let mut registry = CheckerRegistry { checkers: BTreeMap::new() };
        registry.register(Arc::new(DataTypeChecker));
        registry.register(Arc::new(MethodCoverageChecker));
        registry.register(Arc::new(StaticStatusCodeChecker));
        registry.register(Arc::new(DynamicStatusCodeChecker));
        registry
    }
}

impl CheckerRegistry {
    pub fn register(&mut self, checker: Arc<dyn Checker>) {
        self.checkers.insert(checker.name().to_string(), checker);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Checker>> {
        self.checkers.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&str> {
        self.checkers.keys().map(String::as_str).collect()
    }
}
