use std::collections::BTreeMap;

use chrono::Utc;
use proptest::prelude::*;

use super::*;
use crate::executor::{BugTally, CaseOutcome, TestCaseResult};
use crate::spec_model::parse_spec;

fn items_spec() -> ApiSpecification {
    let body = include_str!("../../../testkit/fixtures/specs/items.json");
    parse_spec(body, "items.json").unwrap()
}

fn draft(name: &str, kind: ScenarioKind) -> ScenarioDraft {
    ScenarioDraft { ordinal: 1, name: name.into(), description: format!("{name} description"), kind }
}

fn generated(scenario_id: &str, text: &str) -> GeneratedScript {
    GeneratedScript {
        raw_completion: format!("```python\n{text}\n```"),
        script_text: text.into(),
        scenario_id: scenario_id.into(),
        operation_ids: vec!["op1".into()],
        host_url: "http://localhost".into(),
        needs_review: false,
    }
}

fn execution(id: &str, script_id: &str, outcomes: &[CaseOutcome]) -> ExecutionResult {
    let now = Utc::now();
    ExecutionResult {
        id: id.into(),
        script_id: script_id.into(),
        started_at: now,
        finished_at: now,
        duration_ms: 1,
        runner_exit_code: Some(0),
        timed_out: false,
        cases: outcomes
            .iter()
            .enumerate()
            .map(|(i, o)| TestCaseResult { name: format!("test_{i}"), outcome: *o, message: String::new(), responses: vec![] })
            .collect(),
        observed_status_codes: BTreeMap::new(),
        bug_tally: BugTally::default(),
        raw_runner_output: String::new(),
        error: None,
    }
}

/// Project with three pending unit scenarios on op1, one accepted with a
/// pending script.
fn seeded() -> (Project, Vec<String>, String) {
    let mut p = Project::new("p", items_spec());
    let drafts: Vec<ScenarioDraft> = ["a", "b", "c"].iter().map(|n| draft(n, ScenarioKind::Unit)).collect();
    let ids = p.admit_drafts(&drafts, Some("op1"), &[]).unwrap();
    p.apply_review(ReviewAction::new(&ids[0], ReviewVerb::Accept)).unwrap();
    let script = p.admit_script(generated(&ids[0], "def test_a():\n    assert True\n"), None).unwrap();
    (p, ids, script)
}

#[test]
fn transition_table() {
    use ReviewState::*;
    use ReviewVerb::*;
    let cases = [
        (Pending, Accept, Some(Accepted)),
        (Pending, Reject, Some(Rejected)),
        (Pending, Edit, Some(Accepted)),
        (Pending, Revoke, None),
        (Accepted, Accept, Some(Accepted)),
        (Accepted, Edit, Some(Accepted)),
        (Accepted, Reject, Some(Rejected)),
        (Accepted, Revoke, None),
        (Rejected, Revoke, Some(Pending)),
        (Rejected, Accept, None),
        (Rejected, Edit, None),
        (Rejected, Reject, None),
    ];
    for (state, verb, expected) in cases {
        assert_eq!(next_state(state, verb).ok(), expected, "{state:?} {verb:?}");
    }
    for state in [Pending, Accepted, Rejected] {
        assert!(next_state(state, Add).is_err());
    }
}

#[test]
fn ids_are_sequential_and_prefixed() {
    let (p, ids, script) = seeded();
    assert_eq!(ids, ["p-s1", "p-s2", "p-s3"]);
    assert_eq!(script, "p-t1");
    assert_eq!(p.actions[0].id, "p-a1");
}

#[test]
fn edit_archives_and_flips_provenance() {
    let (mut p, ids, script) = seeded();
    let mut action = ReviewAction::edit(&ids[1], "new description");
    action.edited_name = Some("renamed".into());
    assert_eq!(p.apply_review(action).unwrap(), ReviewState::Accepted);
    let s = p.scenario(&ids[1]).unwrap();
    assert_eq!(s.provenance, Provenance::LlmEdited);
    assert_eq!(s.name, "renamed");
    assert_eq!(s.archived[0].text, "b\nb description");
    assert_eq!(s.original_llm_text.as_ref().unwrap().name, "b");

    p.record_syntax(&script, Some(true)).unwrap();
    p.apply_review(ReviewAction::edit(&script, "def test_b():\n    pass\n")).unwrap();
    let t = p.script(&script).unwrap();
    assert_eq!(t.syntax_valid, None);
    assert_eq!(t.original_syntax_valid, Some(true));
    assert_eq!(t.provenance, Provenance::LlmEdited);
    assert_eq!(t.original_llm_text.as_deref(), Some("def test_a():\n    assert True\n"));

    let empty = ReviewAction::edit(&ids[2], "   ");
    assert!(matches!(p.apply_review(empty), Err(WorkflowError::Validation(_))));
}

#[test]
fn manual_entities_are_accepted_and_logged() {
    let mut p = Project::new("p", items_spec());
    let s = p.add_manual_scenario(ScenarioKind::Unit, Some("op2"), vec![], "manual", "by hand").unwrap();
    let sc = p.scenario(&s).unwrap();
    assert_eq!((sc.provenance, sc.review_state), (Provenance::Manual, ReviewState::Accepted));
    assert_eq!(sc.operation_ids, ["op2"]);
    let t = p.add_manual_script(&s, "def test_x():\n    pass\n", vec![]).unwrap();
    assert_eq!(p.script(&t).unwrap().operation_ids, ["op2"]);
    assert_eq!(p.actions.iter().filter(|a| a.action.verb == ReviewVerb::Add).count(), 2);
    assert!(p.add_manual_scenario(ScenarioKind::Unit, None, vec![], "x", "y").is_err());
    assert!(p.add_manual_scenario(ScenarioKind::Unit, Some("op9"), vec![], "x", "y").is_err());
    assert!(p.add_manual_scenario(ScenarioKind::System, None, vec![], "", "y").is_err());
}

#[test]
fn duplicate_drafts_are_flagged() {
    let (mut p, _, _) = seeded();
    let ids = p.admit_drafts(&[draft("a", ScenarioKind::Unit)], Some("op1"), &[]).unwrap();
    assert_eq!(p.scenario(&ids[0]).unwrap().flags, ["identical to an existing scenario"]);
    assert!(p.admit_drafts(&[draft("z", ScenarioKind::Unit)], None, &[]).is_err());
}

#[test]
fn gates_reject_out_of_order_calls_without_mutation() {
    let (mut p, ids, script) = seeded();
    let before = serde_json::to_string(&p).unwrap();
    let blocked = [
        (Gate::GenerateScript, ids[1].clone()),
        (Gate::Execute, script.clone()),
        (Gate::CheckDataType, script.clone()),
        (Gate::CheckMethodCoverage, script.clone()),
        (Gate::CheckStatusStatic, script.clone()),
        (Gate::CheckStatusDynamic, script.clone()),
    ];
    for (gate, target) in &blocked {
        assert!(matches!(p.check_gate(gate, target), Err(WorkflowError::StageGate(_))), "{gate:?}");
    }
    assert!(matches!(p.admit_script(generated(&ids[1], "x"), None), Err(WorkflowError::StageGate(_))));
    assert_eq!(serde_json::to_string(&p).unwrap(), before);

    // Accepted but not syntax-checked still blocks execution.
    p.apply_review(ReviewAction::new(&script, ReviewVerb::Accept)).unwrap();
    assert!(p.check_gate(&Gate::Execute, &script).is_err());
    p.record_syntax(&script, Some(true)).unwrap();
    p.check_gate(&Gate::Execute, &script).unwrap();
    p.check_gate(&Gate::CheckDataType, &script).unwrap();

    let e = p.next_execution_id();
    p.record_execution(execution(&e, &script, &[CaseOutcome::Passed])).unwrap();
    p.check_gate(&Gate::CheckStatusStatic, &script).unwrap();
    assert!(p.check_gate(&Gate::CheckStatusDynamic, &script).is_err());
    let e = p.next_execution_id();
    p.record_execution(execution(&e, &script, &[CaseOutcome::Passed, CaseOutcome::Failed])).unwrap();
    p.check_gate(&Gate::CheckStatusDynamic, &script).unwrap();
    assert!(p.check_gate(&Gate::CheckStatusStatic, &script).is_err());
    assert!(matches!(p.check_gate(&Gate::Execute, "nope"), Err(WorkflowError::NotFound { .. })));
}

#[test]
fn data_type_confirmation() {
    let (mut p, _, script) = seeded();
    p.script_mut(&script).unwrap().data_type_verdict = Some(DataTypeVerdict { proposed: true, confirmed: None });
    assert!(p.script(&script).unwrap().data_type_verdict.unwrap().effective());
    p.confirm_data_type(&script, false).unwrap();
    let v = p.script(&script).unwrap().data_type_verdict.unwrap();
    assert_eq!((v.proposed, v.confirmed, v.effective()), (true, Some(false), false));
}

#[test]
fn tree_and_summaries_follow_progress() {
    let (mut p, ids, script) = seeded();
    let tree = build_tree(&p);
    assert_eq!(tree.children[0].completion_percent, 0.0);
    let unit_op1 = tree.children[0].children.iter().find(|n| n.id == "unit:op1").unwrap();
    assert_eq!(unit_op1.completion_percent, 33.33);
    assert_eq!(unit_op1.children[0].id, format!("scripts:{}", ids[0]));
    // No system scenarios yet: nothing to do there.
    assert_eq!(tree.children[1].completion_percent, 100.0);
    assert_eq!(tree.completion_percent, 50.0);

    p.apply_review(ReviewAction::new(&ids[1], ReviewVerb::Reject)).unwrap();
    p.apply_review(ReviewAction::new(&ids[2], ReviewVerb::Reject)).unwrap();
    p.apply_review(ReviewAction::new(&script, ReviewVerb::Accept)).unwrap();
    p.record_syntax(&script, Some(true)).unwrap();
    let e = p.next_execution_id();
    p.record_execution(execution(&e, &script, &[CaseOutcome::Passed])).unwrap();

    let SummarySnapshot::Operation(op) = compute_summary(&p, &SubjectRef::Operation("op1".into())).unwrap() else {
        panic!()
    };
    assert_eq!(op.unit_scenarios.total, 3);
    assert_eq!(op.unit_scenarios.final_count, 1);
    assert_eq!(op.unit_scenarios.accepted_percent, 100.0);
    let SummarySnapshot::Spec(spec) = compute_summary(&p, &SubjectRef::Spec).unwrap() else { panic!() };
    assert_eq!((spec.operations, spec.unit_test_completed), (3, 1));
    let tree = build_tree(&p);
    assert_eq!(tree.children[0].completion_percent, 33.33);
    let SummarySnapshot::Scenario(sc) = compute_summary(&p, &SubjectRef::Scenario(ids[0].clone())).unwrap() else {
        panic!()
    };
    assert_eq!((sc.scripts.executed_percent, sc.scripts.failed), (100.0, 0));
    assert!(compute_summary(&p, &SubjectRef::Operation("op9".into())).is_err());
}

fn round_trip(store: &dyn ProjectStore) {
    let (mut p, _, script) = seeded();
    let e = p.next_execution_id();
    p.record_execution(execution(&e, &script, &[CaseOutcome::Failed])).unwrap();
    store.save(&p).unwrap();
    store.save(&p).unwrap();
    assert_eq!(store.load("p").unwrap(), p);
    assert_eq!(store.list().unwrap(), ["p"]);

    p.apply_review(ReviewAction::new(&script, ReviewVerb::Reject)).unwrap();
    store.save(&p).unwrap();
    assert_eq!(store.load("p").unwrap(), p);
    assert!(matches!(store.load("q"), Err(StoreError::NotFound(_))));
}

#[test]
fn memory_store_round_trip() {
    round_trip(&MemoryStore::default());
}

#[test]
fn sqlite_store_round_trip_and_reopen() {
    round_trip(&SqliteStore::in_memory().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("projects.db");
    let (p, _, _) = seeded();
    SqliteStore::open(&path).unwrap().save(&p).unwrap();
    let reopened = StoreRegistry::default().build("sqlite", path.to_str()).unwrap();
    assert_eq!(reopened.load("p").unwrap(), p);
    assert!(StoreRegistry::default().build("mongo", None).is_err());
}

#[test]
fn bundles_check_the_schema_version() {
    let (p, _, _) = seeded();
    let bundle = p.export_bundle();
    assert_eq!(Project::import_bundle(bundle.clone()).unwrap(), p);
    let mut old = bundle;
    old["schema_version"] = 0.into();
    assert_eq!(Project::import_bundle(old), Err(StoreError::VersionMismatch { found: 0, expected: SCHEMA_VERSION }));
}

#[derive(Debug, Clone)]
enum Step {
    Review(usize, ReviewVerb),
    Edit(usize, String),
}

fn step() -> impl Strategy<Value = Step> {
    let verb = prop_oneof![Just(ReviewVerb::Accept), Just(ReviewVerb::Reject), Just(ReviewVerb::Revoke)];
    prop_oneof![
        3 => (0usize..5, verb).prop_map(|(i, v)| Step::Review(i, v)),
        1 => (0usize..5, "[a-z ]{0,8}").prop_map(|(i, t)| Step::Edit(i, t)),
    ]
}

/// Independent recount of a scenario set summary.
fn recount(scenarios: &[&TestScenario]) -> (usize, usize, usize, usize, f64) {
    let final_count = scenarios.iter().filter(|s| s.review_state != ReviewState::Rejected).count();
    let pending = scenarios.iter().filter(|s| s.review_state == ReviewState::Pending).count();
    let unmodified = scenarios
        .iter()
        .filter(|s| s.review_state == ReviewState::Accepted && s.provenance == Provenance::Llm)
        .count();
    let accepted = if final_count == 0 { 0.0 } else { (unmodified as f64 * 10000.0 / final_count as f64).round() / 100.0 };
    (scenarios.len(), final_count, scenarios.len() - final_count, pending, accepted)
}

proptest! {
    #[test]
    fn review_sequences_stay_well_defined(steps in prop::collection::vec(step(), 1..40)) {
        let (mut p, ids, script) = seeded();
        let targets: Vec<String> = ids.iter().cloned().chain([script.clone(), "missing".to_string()]).collect();
        for s in steps {
            let (target, action) = match &s {
                Step::Review(i, verb) => (&targets[*i], ReviewAction::new(&targets[*i], *verb)),
                Step::Edit(i, text) => (&targets[*i], ReviewAction::edit(&targets[*i], text.clone())),
            };
            let before = serde_json::to_string(&p).unwrap();
            let text_before = p.scenario(target).map(|s| s.text()).ok();
            let state_before = p.scenario(target).map(|s| s.review_state)
                .or_else(|_| p.script(target).map(|t| t.review_state)).ok();
            let expected = state_before.map(|st| next_state(st, action.verb));
            let valid_edit = action.edited_text.as_deref().is_none_or(|t| !t.trim().is_empty());
            match p.apply_review(action.clone()) {
                Ok(state) => {
                    prop_assert_eq!(Some(Ok(state)), expected);
                    if matches!(action.verb, ReviewVerb::Reject | ReviewVerb::Revoke) {
                        prop_assert_eq!(p.scenario(target).map(|s| s.text()).ok(), text_before);
                    }
                }
                Err(_) => {
                    prop_assert!(!valid_edit || !matches!(expected, Some(Ok(_))));
                    prop_assert_eq!(serde_json::to_string(&p).unwrap(), before);
                }
            }
            let unit: Vec<&TestScenario> = p.scenarios.iter().collect();
            let SummarySnapshot::Operation(op) = compute_summary(&p, &SubjectRef::Operation("op1".into())).unwrap() else {
                unreachable!()
            };
            let u = &op.unit_scenarios;
            prop_assert_eq!((u.total, u.final_count, u.rejected, u.pending, u.accepted_percent), recount(&unit));
        }
    }
}
