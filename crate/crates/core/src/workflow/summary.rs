//! Summary snapshots and the navigation tree. Everything here is derived from
//! the current entity states on every call; nothing is cached.

use serde::{Deserialize, Serialize};

use super::model::{Project, Provenance, TestScenario, TestScript};
use super::WorkflowError;
use crate::agents::{round2, ScenarioKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "kebab-case")]
pub enum SubjectRef {
    Spec,
    Operation(String),
    Scenario(String),
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        round2(num as f64 * 100.0 / den as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSetSummary {
    /// All scenarios in the set, rejected ones included.
    pub total: usize,
    pub final_count: usize,
    pub rejected: usize,
    pub pending: usize,
    pub reviewed_percent: f64,
    /// LLM scenarios accepted without modification, over final scenarios.
    pub accepted_percent: f64,
    pub manually_added: usize,
    pub edited: usize,
}

impl ScenarioSetSummary {
    pub fn of<'a>(scenarios: impl IntoIterator<Item = &'a TestScenario>) -> Self {
        let scenarios: Vec<&TestScenario> = scenarios.into_iter().collect();
        let finals: Vec<&&TestScenario> = scenarios.iter().filter(|s| s.is_final()).collect();
        ScenarioSetSummary {
            total: scenarios.len(),
            final_count: finals.len(),
            rejected: scenarios.len() - finals.len(),
            pending: scenarios.iter().filter(|s| s.review_state == super::ReviewState::Pending).count(),
            reviewed_percent: pct(scenarios.iter().filter(|s| s.is_reviewed()).count(), scenarios.len()),
            accepted_percent: pct(finals.iter().filter(|s| s.is_llm_unmodified_accepted()).count(), finals.len()),
            manually_added: finals.iter().filter(|s| s.provenance == Provenance::Manual).count(),
            edited: finals.iter().filter(|s| s.provenance == Provenance::LlmEdited).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptSetSummary {
    pub total: usize,
    pub final_count: usize,
    pub rejected: usize,
    pub reviewed_percent: f64,
    pub executed_percent: f64,
    pub accepted_percent: f64,
    pub manually_added: usize,
    pub edited: usize,
    /// Final scripts whose latest execution has a failed or errored case.
    pub failed: usize,
    pub syntax_errors: usize,
    pub data_type_errors: usize,
    /// Final scripts whose method coverage is below 100%.
    pub semantic_errors: usize,
}

impl ScriptSetSummary {
    pub fn of<'a>(project: &Project, scripts: impl IntoIterator<Item = &'a TestScript>) -> Self {
        let scripts: Vec<&TestScript> = scripts.into_iter().collect();
        let finals: Vec<&&TestScript> = scripts.iter().filter(|s| s.is_final()).collect();
        let count = |pred: &dyn Fn(&TestScript) -> bool| finals.iter().filter(|s| pred(s)).count();
        ScriptSetSummary {
            total: scripts.len(),
            final_count: finals.len(),
            rejected: scripts.len() - finals.len(),
            reviewed_percent: pct(scripts.iter().filter(|s| s.is_reviewed()).count(), scripts.len()),
            executed_percent: pct(count(&|s| !s.executions.is_empty()), finals.len()),
            accepted_percent: pct(
                count(&|s| s.provenance == Provenance::Llm && s.review_state == super::ReviewState::Accepted),
                finals.len(),
            ),
            manually_added: count(&|s| s.provenance == Provenance::Manual),
            edited: count(&|s| s.provenance == Provenance::LlmEdited),
            failed: count(&|s| project.latest_execution(s).is_some_and(|e| e.any_failed())),
            syntax_errors: count(&|s| s.syntax_valid == Some(false)),
            data_type_errors: count(&|s| s.data_type_verdict.is_some_and(|v| !v.effective())),
            semantic_errors: count(&|s| {
                s.method_coverage_report
                    .as_ref()
                    .and_then(|r| r.coverage_percent)
                    .is_some_and(|p| p < 100.0)
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecSummary {
    pub operations: usize,
    pub unit_test_completed: usize,
    pub system_test_completed: usize,
    pub system_scenarios: ScenarioSetSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationSummary {
    pub operation_id: String,
    pub unit_scenarios: ScenarioSetSummary,
    pub system_scenarios: ScenarioSetSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario_id: String,
    pub scripts: ScriptSetSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subject", rename_all = "kebab-case")]
pub enum SummarySnapshot {
    Spec(SpecSummary),
    Operation(OperationSummary),
    Scenario(ScenarioSummary),
}

fn unit_scenarios<'a>(project: &'a Project, op: &'a str) -> impl Iterator<Item = &'a TestScenario> {
    project
        .scenarios
        .iter()
        .filter(move |s| s.kind == ScenarioKind::Unit && s.owner_operation.as_deref() == Some(op))
}

fn system_scenarios_of<'a>(project: &'a Project, op: &'a str) -> impl Iterator<Item = &'a TestScenario> {
    project
        .scenarios
        .iter()
        .filter(move |s| s.kind == ScenarioKind::System && s.operation_ids.iter().any(|o| o == op))
}

/// A set of scenarios is tested when it is non-empty, fully reviewed, and
/// every final scenario has an executed final script.
fn tested<'a>(project: &Project, scenarios: impl Iterator<Item = &'a TestScenario>) -> bool {
    let mut any = false;
    for scenario in scenarios {
        any = true;
        if !scenario.is_reviewed() {
            return false;
        }
        if scenario.is_final()
            && !project.scripts_of(&scenario.id).any(|t| t.is_final() && !t.executions.is_empty())
        {
            return false;
        }
    }
    any
}

pub fn operation_unit_tested(project: &Project, op: &str) -> bool {
    tested(project, unit_scenarios(project, op))
}

pub fn operation_system_tested(project: &Project, op: &str) -> bool {
    tested(project, system_scenarios_of(project, op))
}

pub fn compute_summary(project: &Project, subject: &SubjectRef) -> Result<SummarySnapshot, WorkflowError> {
    Ok(match subject {
        SubjectRef::Spec => {
            let ops = &project.spec.operations;
            SummarySnapshot::Spec(SpecSummary {
                operations: ops.len(),
                unit_test_completed: ops.iter().filter(|op| operation_unit_tested(project, &op.id)).count(),
                system_test_completed: ops.iter().filter(|op| operation_system_tested(project, &op.id)).count(),
                system_scenarios: ScenarioSetSummary::of(
                    project.scenarios.iter().filter(|s| s.kind == ScenarioKind::System),
                ),
            })
        }
        SubjectRef::Operation(id) => {
            project.require_operation(id)?;
            SummarySnapshot::Operation(OperationSummary {
                operation_id: id.clone(),
                unit_scenarios: ScenarioSetSummary::of(unit_scenarios(project, id)),
                system_scenarios: ScenarioSetSummary::of(system_scenarios_of(project, id)),
            })
        }
        SubjectRef::Scenario(id) => {
            project.scenario(id)?;
            SummarySnapshot::Scenario(ScenarioSummary {
                scenario_id: id.clone(),
                scripts: ScriptSetSummary::of(project, project.scripts_of(id)),
            })
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeType {
    Home,
    Spec,
    OperationUnitScenarios,
    SystemScenarios,
    OperationSystemScenarios,
    ScenarioScripts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityNode {
    pub id: String,
    pub node_type: NodeType,
    pub display_name: String,
    /// The entity the node opens: project, operation or scenario id.
    pub target_id: String,
    pub completion_percent: f64,
    pub children: Vec<EntityNode>,
}

/// `done / total`, 100 when there is nothing to do.
fn completion(done: usize, total: usize) -> f64 {
    if total == 0 {
        100.0
    } else {
        round2(done as f64 * 100.0 / total as f64)
    }
}

fn scenario_completion<'a>(scenarios: impl Iterator<Item = &'a TestScenario>) -> f64 {
    let (mut done, mut total) = (0, 0);
    for s in scenarios {
        total += 1;
        done += usize::from(s.is_reviewed());
    }
    completion(done, total)
}

fn script_nodes(project: &Project, scenarios: &[&TestScenario]) -> Vec<EntityNode> {
    scenarios
        .iter()
        .filter(|s| project.scripts_of(&s.id).next().is_some())
        .map(|s| {
            let scripts: Vec<&TestScript> = project.scripts_of(&s.id).collect();
            EntityNode {
                id: format!("scripts:{}", s.id),
                node_type: NodeType::ScenarioScripts,
                display_name: s.name.clone(),
                target_id: s.id.clone(),
                completion_percent: completion(scripts.iter().filter(|t| t.is_reviewed()).count(), scripts.len()),
                children: Vec::new(),
            }
        })
        .collect()
}

pub fn build_tree(project: &Project) -> EntityNode {
    let ops = &project.spec.operations;
    let op_nodes: Vec<EntityNode> = ops
        .iter()
        .map(|op| {
            let scenarios: Vec<&TestScenario> = unit_scenarios(project, &op.id).collect();
            EntityNode {
                id: format!("unit:{}", op.id),
                node_type: NodeType::OperationUnitScenarios,
                display_name: op.key(),
                target_id: op.id.clone(),
                completion_percent: scenario_completion(scenarios.iter().copied()),
                children: script_nodes(project, &scenarios),
            }
        })
        .collect();
    let spec_node = EntityNode {
        id: format!("spec:{}", project.id),
        node_type: NodeType::Spec,
        display_name: project.spec.title.clone(),
        target_id: project.id.clone(),
        completion_percent: completion(
            ops.iter().filter(|op| operation_unit_tested(project, &op.id)).count(),
            ops.len(),
        ),
        children: op_nodes,
    };

    let system: Vec<&TestScenario> =
        project.scenarios.iter().filter(|s| s.kind == ScenarioKind::System).collect();
    let mut system_children: Vec<EntityNode> = ops
        .iter()
        .filter(|op| system.iter().any(|s| s.operation_ids.contains(&op.id)))
        .map(|op| EntityNode {
            id: format!("opsys:{}", op.id),
            node_type: NodeType::OperationSystemScenarios,
            display_name: op.key(),
            target_id: op.id.clone(),
            completion_percent: scenario_completion(system_scenarios_of(project, &op.id)),
            children: Vec::new(),
        })
        .collect();
    system_children.extend(script_nodes(project, &system));
    let system_node = EntityNode {
        id: format!("system:{}", project.id),
        node_type: NodeType::SystemScenarios,
        display_name: "System test scenarios".into(),
        target_id: project.id.clone(),
        completion_percent: scenario_completion(system.iter().copied()),
        children: system_children,
    };

    let complete = [&spec_node, &system_node].iter().filter(|n| n.completion_percent >= 100.0).count();
    EntityNode {
        id: format!("home:{}", project.id),
        node_type: NodeType::Home,
        display_name: format!("{} ({})", project.spec.title, project.spec.source),
        target_id: project.id.clone(),
        completion_percent: completion(complete, 2),
        children: vec![spec_node, system_node],
    }
}
