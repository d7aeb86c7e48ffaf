//! A small project built through the workflow API with every review outcome
//! represented, for checking metrics against hand-computed values.
//!
//! Operations are those of the items spec: op1 `GET /items`, op2
//! `POST /items`, op3 `GET /items/{itemId}`.
//!
//! | entity | kind   | provenance | state    | notes                          |
//! |--------|--------|------------|----------|--------------------------------|
//! | u-a    | unit   | llm        | accepted | op1, script t-a                |
//! | u-b    | unit   | llm        | accepted | op1, script t-b (edited)       |
//! | u-c    | unit   | llm-edited | accepted | op1                            |
//! | u-d    | unit   | llm        | rejected | op1                            |
//! | u-m    | unit   | manual     | accepted | op1, manual script t-m         |
//! | u-e    | unit   | llm        | accepted | op2, script t-e (rejected)     |
//! | u-f    | unit   | llm        | pending  | op2                            |
//! | y-1    | system | llm        | accepted | op2+op3, script t-y1           |
//! | y-2    | system | llm-edited | accepted | op1+op3, manual script t-y2    |
//! | y-3    | system | llm        | rejected | op1+op2                        |
//! | y-m    | system | manual     | accepted | op1                            |

use std::collections::{BTreeMap, BTreeSet};

use chrono::{TimeZone, Utc};
use restbench_core::agents::{GeneratedScript, ScenarioDraft, ScenarioKind};
use restbench_core::executor::{BugTally, CapturedResponse, CaseOutcome, ExecutionResult, TestCaseResult};
use restbench_core::workflow::{AdmitExtras, Project, ReviewAction, ReviewVerb};

use crate::fixtures;

/// Script text before and after the reviewer's edit of t-b.
pub const EDITED_ORIGINAL: &str = "def test_b():\n    assert get('/items').status == 200\n";
pub const EDITED_FINAL: &str = "def test_b():\n    assert get('/items').status_code == 200\n";

/// Ids of the entities in the table above.
#[derive(Debug, Clone, Default)]
pub struct SyntheticIds {
    pub scenarios: BTreeMap<&'static str, String>,
    pub scripts: BTreeMap<&'static str, String>,
}

fn draft(name: &str, kind: ScenarioKind) -> ScenarioDraft {
    ScenarioDraft { ordinal: 1, name: name.into(), description: format!("{name}: steps and checks"), kind }
}

fn script_text(name: &str) -> String {
    format!("def test_{name}():\n    assert True\n")
}

fn generated(scenario_id: &str, text: &str, ops: &[&str]) -> GeneratedScript {
    GeneratedScript {
        raw_completion: text.to_string(),
        script_text: text.to_string(),
        scenario_id: scenario_id.to_string(),
        operation_ids: ops.iter().map(|s| s.to_string()).collect(),
        host_url: "http://127.0.0.1".into(),
        needs_review: false,
    }
}

fn execution(id: String, script_id: &str, responses: &[(&str, &str, u16)]) -> ExecutionResult {
    let at = Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap();
    let responses: Vec<CapturedResponse> = responses
        .iter()
        .map(|(m, p, s)| CapturedResponse { method: m.to_string(), path: p.to_string(), status: *s, body_digest: String::new() })
        .collect();
    let spec = fixtures::spec("items.json");
    let cases = vec![TestCaseResult {
        name: "test_case".into(),
        outcome: CaseOutcome::Passed,
        message: String::new(),
        responses,
    }];
    ExecutionResult {
        id,
        script_id: script_id.into(),
        started_at: at,
        finished_at: at,
        duration_ms: 0,
        runner_exit_code: Some(0),
        timed_out: false,
        observed_status_codes: restbench_core::executor::observed_codes(&cases, &spec),
        cases,
        bug_tally: BugTally::default(),
        raw_runner_output: String::new(),
        error: None,
    }
}

pub fn synthetic_project() -> (Project, SyntheticIds) {
    let mut p = Project::new("syn", fixtures::spec("items.json"));
    let mut ids = SyntheticIds::default();
    let review = |p: &mut Project, id: &str, verb: ReviewVerb| {
        p.apply_review(ReviewAction::new(id, verb)).expect("synthetic review");
    };

    let unit1 = p
        .admit_drafts(&["u-a", "u-b", "u-c", "u-d"].map(|n| draft(n, ScenarioKind::Unit)), Some("op1"), &[])
        .unwrap();
    let unit2 = p.admit_drafts(&["u-e", "u-f"].map(|n| draft(n, ScenarioKind::Unit)), Some("op2"), &[]).unwrap();
    let extras = [["op2", "op3"], ["op1", "op3"], ["op1", "op2"]]
        .map(|ops| AdmitExtras { operation_ids: ops.map(String::from).to_vec(), ..Default::default() });
    let system = p
        .admit_drafts(&["y-1", "y-2", "y-3"].map(|n| draft(n, ScenarioKind::System)), None, &extras)
        .unwrap();
    for (name, id) in ["u-a", "u-b", "u-c", "u-d"].iter().zip(&unit1) {
        ids.scenarios.insert(name, id.clone());
    }
    for (name, id) in ["u-e", "u-f"].iter().zip(&unit2) {
        ids.scenarios.insert(name, id.clone());
    }
    for (name, id) in ["y-1", "y-2", "y-3"].iter().zip(&system) {
        ids.scenarios.insert(name, id.clone());
    }
    let admitted = ids.scenarios.clone();
    let s = |name: &str| admitted[name].clone();

    review(&mut p, &s("u-a"), ReviewVerb::Accept);
    review(&mut p, &s("u-b"), ReviewVerb::Accept);
    p.apply_review(ReviewAction::edit(s("u-c"), "u-c: reviewer rewrote the steps")).unwrap();
    review(&mut p, &s("u-d"), ReviewVerb::Reject);
    review(&mut p, &s("u-e"), ReviewVerb::Accept);
    review(&mut p, &s("y-1"), ReviewVerb::Accept);
    p.apply_review(ReviewAction::edit(s("y-2"), "y-2: reviewer rewrote the sequence")).unwrap();
    review(&mut p, &s("y-3"), ReviewVerb::Reject);
    let u_m = p.add_manual_scenario(ScenarioKind::Unit, Some("op1"), vec![], "u-m", "written by hand").unwrap();
    let y_m = p
        .add_manual_scenario(ScenarioKind::System, None, vec!["op1".into()], "y-m", "written by hand")
        .unwrap();
    ids.scenarios.insert("u-m", u_m.clone());
    ids.scenarios.insert("y-m", y_m);

    let t_a = p.admit_script(generated(&s("u-a"), &script_text("a"), &["op1"]), None).unwrap();
    let t_b = p.admit_script(generated(&s("u-b"), EDITED_ORIGINAL, &["op1"]), None).unwrap();
    let t_e = p.admit_script(generated(&s("u-e"), &script_text("e"), &["op2"]), None).unwrap();
    let t_y1 = p.admit_script(generated(&s("y-1"), &script_text("y1"), &["op2", "op3"]), None).unwrap();
    let t_m = p.add_manual_script(&u_m, &script_text("m"), vec![]).unwrap();
    let t_y2 = p.add_manual_script(&s("y-2"), &script_text("y2"), vec!["op3".into()]).unwrap();

    review(&mut p, &t_a, ReviewVerb::Accept);
    p.apply_review(ReviewAction::edit(&t_b, EDITED_FINAL)).unwrap();
    review(&mut p, &t_e, ReviewVerb::Reject);
    review(&mut p, &t_y1, ReviewVerb::Accept);

    for (id, original_valid, data_type) in [(&t_a, true, true), (&t_b, false, false), (&t_e, true, true), (&t_y1, true, true)] {
        p.record_original_syntax(id, Some(original_valid)).unwrap();
        p.confirm_data_type(id, data_type).unwrap();
    }
    for id in [&t_a, &t_b, &t_m, &t_y1, &t_y2] {
        p.record_syntax(id, Some(true)).unwrap();
    }

    let e = p.next_execution_id();
    p.record_execution(execution(e, &t_a, &[("GET", "/items", 200), ("GET", "/items", 500)])).unwrap();
    let e = p.next_execution_id();
    p.record_execution(execution(e, &t_y1, &[("POST", "/items", 201), ("GET", "/items/3", 200)])).unwrap();
    // Rejected scripts do not count towards received codes.
    let e = p.next_execution_id();
    p.record_execution(execution(e, &t_e, &[("POST", "/items", 400), ("GET", "/items/9", 404)])).unwrap();

    for (name, id) in [("t-a", t_a), ("t-b", t_b), ("t-e", t_e), ("t-y1", t_y1), ("t-m", t_m), ("t-y2", t_y2)] {
        ids.scripts.insert(name, id);
    }
    (p, ids)
}

/// Hand-computed values for [`synthetic_project`], as exact fractions.
pub fn expected_values() -> BTreeMap<(&'static str, &'static str), (f64, f64)> {
    let edit = restbench_core::metrics::levenshtein(EDITED_ORIGINAL, EDITED_FINAL) as f64;
    BTreeMap::from([
        // t-a, t-b, t-y1 are the LLM scripts still in use; t-b's original text is invalid.
        (("Cor_Syn", "syn"), (2.0, 3.0)),
        (("Cor_DT", "syn"), (2.0, 3.0)),
        // Final scripts: t-a, t-b, t-m, t-y1, t-y2.
        (("Usability", "syn"), (edit, 5.0)),
        (("Usability_strict", "syn"), (edit, 3.0)),
        // op1 finals: u-a, u-b, u-c, u-m. op2 finals: u-e, u-f.
        (("Cov_US_op", "op1"), (2.0, 4.0)),
        (("Cov_US_op", "op2"), (1.0, 2.0)),
        (("Cov_US_api", "syn"), (3.0, 6.0)),
        // System finals: y-1, y-2, y-m.
        (("Cov_SS", "syn"), (1.0, 3.0)),
        // t-y1 covers op2 and op3, t-y2 covers op3.
        (("Cov_Ops", "syn"), (2.0, 3.0)),
        // op1 saw 200 (500 is undeclared); op2 saw 201; op3 saw 200.
        (("Cov_SCode", "op1"), (1.0, 2.0)),
        (("Cov_SCode", "op2"), (1.0, 2.0)),
        (("Cov_SCode", "op3"), (1.0, 2.0)),
        (("Cov_SCode_api", "syn"), (3.0, 6.0)),
    ])
}

/// Metrics the synthetic project leaves undefined.
pub fn expected_undefined() -> BTreeSet<(&'static str, &'static str)> {
    BTreeSet::from([("Cov_US_op", "op3")])
}
