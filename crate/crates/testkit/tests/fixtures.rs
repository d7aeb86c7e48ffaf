use restbench_core::agents::{
    parse_data_type_report, parse_method_coverage_report, parse_scenario_list, parse_status_code_report,
    ScenarioKind, StatusCodeMode,
};
use restbench_core::llm::{TemplateName, TemplateStore};
use restbench_testkit::{fixtures, RoutingTable};

#[test]
fn pinned_snapshots_are_unchanged() {
    assert_eq!(fixtures::pinned_mismatches(), Vec::<(String, String)>::new());
}

#[test]
fn bundled_specs_have_the_expected_operation_counts() {
    assert_eq!(fixtures::spec("petstore3.json").operations.len(), 19);
    assert_eq!(fixtures::spec("catfact.json").operations.len(), 3);
    let items = fixtures::spec("items.json");
    let keys: Vec<String> = items.operations.iter().map(|o| o.key()).collect();
    assert_eq!(keys, ["GET /items", "POST /items", "GET /items/{itemId}"]);
}

#[test]
fn rendered_prompts_equal_goldens() {
    let store = TemplateStore::shipped();
    let bindings = fixtures::golden_bindings();
    for name in TemplateName::ALL {
        let key = name.store_key();
        let rendered = store.render(name, &bindings[key]).unwrap();
        assert!(rendered.warnings.is_empty(), "{key}: {:?}", rendered.warnings);
        let system = std::fs::read_to_string(fixtures::goldens_dir().join(format!("{key}.system.txt"))).unwrap();
        let user = std::fs::read_to_string(fixtures::goldens_dir().join(format!("{key}.user.txt"))).unwrap();
        assert_eq!(rendered.prompt.system_message, system, "{key} system");
        assert_eq!(rendered.prompt.user_message, user, "{key} user");
    }
}

#[test]
fn items_table_covers_every_template() {
    let table = RoutingTable::load(&fixtures::table_path("items.json")).unwrap();
    for name in TemplateName::ALL {
        assert!(
            table.rules.iter().any(|r| r.template.as_deref() == Some(name.store_key())),
            "{name:?} has no rule"
        );
    }
}

#[test]
fn canned_completions_parse() {
    for file in ["unit_scenarios_list_items.txt", "unit_scenarios_create_item.txt", "unit_scenarios_get_item.txt"] {
        let parsed = parse_scenario_list(&fixtures::completion(file), ScenarioKind::Unit);
        assert_eq!(parsed.drafts.len(), 2, "{file}");
        assert!(parsed.warnings.is_empty(), "{file}: {:?}", parsed.warnings);
    }
    assert_eq!(parse_scenario_list(&fixtures::completion("system_scenarios.txt"), ScenarioKind::System).drafts.len(), 2);

    let dt = parse_data_type_report(&fixtures::completion("data_type_report.json")).unwrap();
    assert_eq!(dt.coverage_percent, 50.0);
    assert!(!dt.warnings.is_empty());
    let mc = parse_method_coverage_report(&fixtures::completion("method_coverage_report.json")).unwrap();
    assert_eq!(mc.coverage_percent, Some(66.67));
    let sc = parse_status_code_report(&fixtures::completion("status_code_static.json"), StatusCodeMode::Static).unwrap();
    assert_eq!(sc.coverage_percent, Some(60.0));
    let dy = parse_status_code_report(&fixtures::completion("status_code_dynamic.json"), StatusCodeMode::Dynamic).unwrap();
    assert_eq!(dy.coverage_percent, Some(50.0));
}

#[test]
fn malformed_completions_are_rejected() {
    assert!(parse_scenario_list(&fixtures::completion("malformed_scenarios_prose.txt"), ScenarioKind::Unit)
        .drafts
        .is_empty());
    assert!(parse_scenario_list(&fixtures::completion("malformed_empty.txt"), ScenarioKind::Unit).drafts.is_empty());
    for file in ["malformed_report_not_json.txt", "malformed_report_shape.json", "malformed_empty.txt"] {
        let text = fixtures::completion(file);
        assert!(parse_data_type_report(&text).is_err(), "{file}");
        assert!(parse_method_coverage_report(&text).is_err(), "{file}");
        assert!(parse_status_code_report(&text, StatusCodeMode::Static).is_err(), "{file}");
    }
}
