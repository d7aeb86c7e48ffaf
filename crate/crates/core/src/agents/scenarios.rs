//! Parsing of numbered scenario lists and linking of scenario text to the
//! operations it mentions.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::spec_model::{path_template_match, ApiOperation, HttpMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Unit,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioDraft {
    pub ordinal: u32,
    pub name: String,
    pub description: String,
    pub kind: ScenarioKind,
}

impl ScenarioDraft {
    /// The two-line form bound into script and checker prompts.
    pub fn prompt_text(&self) -> String {
        scenario_prompt_text(&self.name, &self.description)
    }
}

pub fn scenario_prompt_text(name: &str, description: &str) -> String {
    format!("Scenario Name: {name}\nScenario Description: {description}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedScenarios {
    pub drafts: Vec<ScenarioDraft>,
    pub warnings: Vec<String>,
}

fn item_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*(\d+)\.\s*(?:\*\*)?Scenario Name:(?:\*\*)?\s*(.*?)\s*(?:\*\*)?\s*$").unwrap()
    })
}

fn description_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\*\*)?Scenario Description:(?:\*\*)?\s*(.*)$").unwrap())
}

/// Line-oriented scenario list parser.
///
/// An item starts at a line matching `N. Scenario Name:`; everything up to the
/// next item belongs to its description, with the `Scenario Description:` label
/// removed, each line trimmed and empty lines dropped. Ordinals are always
/// renumbered from 1; skipped model numbering produces a warning.
pub fn parse_scenario_list(text: &str, kind: ScenarioKind) -> ParsedScenarios {
    struct Item {
        stated: u64,
        name: String,
        lines: Vec<String>,
    }
    let mut items: Vec<Item> = Vec::new();
    let mut warnings = Vec::new();
    for line in text.lines() {
        if let Some(caps) = item_pattern().captures(line) {
            items.push(Item {
                stated: caps[1].parse().unwrap_or(0),
                name: caps[2].trim().to_string(),
                lines: Vec::new(),
            });
            continue;
        }
        let Some(item) = items.last_mut() else {
            continue;
        };
        let content = match description_pattern().captures(line) {
            Some(caps) => caps[1].trim().to_string(),
            None => line.trim().to_string(),
        };
        if !content.is_empty() {
            item.lines.push(content);
        }
    }

    let mut out = ParsedScenarios::default();
    let mut renumbered = false;
    for item in items {
        if item.name.is_empty() {
            warnings.push(format!("scenario item {} has an empty name; dropped", item.stated));
            continue;
        }
        let ordinal = out.drafts.len() as u32 + 1;
        renumbered |= item.stated != u64::from(ordinal);
        out.drafts.push(ScenarioDraft {
            ordinal,
            name: item.name,
            description: item.lines.join("\n"),
            kind,
        });
    }
    if renumbered {
        warnings.push("scenario numbering was not sequential; renumbered from 1".into());
    }
    out.warnings = warnings;
    out
}

/// Writes drafts in the list layout the generator templates ask for.
pub fn format_scenario_list(drafts: &[ScenarioDraft]) -> String {
    let mut out = String::new();
    for (i, draft) in drafts.iter().enumerate() {
        out.push_str(&format!("{}. Scenario Name: {}\n", i + 1, draft.name));
        let mut lines = draft.description.lines();
        out.push_str(&format!("   Scenario Description: {}\n", lines.next().unwrap_or_default()));
        for line in lines {
            out.push_str(&format!("   {line}\n"));
        }
    }
    out
}

/// Operations referenced by free text such as a system scenario description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OperationLinks {
    /// Linked operation ids, in order of first mention.
    pub operation_ids: Vec<String>,
    /// Number of `METHOD /path` call mentions found, including repeats.
    pub mentions: usize,
    /// Mentions that fit more than one operation equally well.
    pub ambiguous: Vec<String>,
    /// Mentions that fit no declared operation.
    pub unmatched: Vec<String>,
}

fn call_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?i)\b(GET|PUT|POST|DELETE|PATCH|HEAD|OPTIONS)\s+(/[^\s,;)"'`\]]*)"#).unwrap()
    })
}

/// Case-insensitive `METHOD /path` matching. A mention equal to a declared
/// template links directly; otherwise it is matched as a concrete path against
/// the templates, preferring the one with the most literal segments.
pub fn link_operations(text: &str, operations: &[ApiOperation]) -> OperationLinks {
    let mut links = OperationLinks::default();
    for caps in call_pattern().captures_iter(text) {
        let Some(method) = HttpMethod::parse(&caps[1]) else {
            continue;
        };
        let raw = caps[2].split(['?', '#']).next().unwrap_or_default();
        let path = raw.trim_end_matches(['.', ':']);
        let mention = format!("{method} {path}");
        links.mentions += 1;

        let exact = operations
            .iter()
            .find(|op| op.method == method && op.path.eq_ignore_ascii_case(path));
        let chosen = match exact {
            Some(op) => Some(op),
            None => {
                let mut scored: Vec<(&ApiOperation, usize)> = operations
                    .iter()
                    .filter(|op| op.method == method)
                    .filter_map(|op| path_template_match(&op.path, path).map(|hits| (op, hits)))
                    .collect();
                scored.sort_by_key(|s| std::cmp::Reverse(s.1));
                match scored.as_slice() {
                    [] => {
                        if !links.unmatched.contains(&mention) {
                            links.unmatched.push(mention);
                        }
                        None
                    }
                    [(op, _)] => Some(*op),
                    [(first, a), (_, b), ..] if a > b => Some(*first),
                    _ => {
                        if !links.ambiguous.contains(&mention) {
                            links.ambiguous.push(mention);
                        }
                        None
                    }
                }
            }
        };
        if let Some(op) = chosen {
            if !links.operation_ids.contains(&op.id) {
                links.operation_ids.push(op.id.clone());
            }
        }
    }
    links
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_model::parse_spec;
    use proptest::prelude::*;

    const F1: &str = "1. Scenario Name: List all items\n   Scenario Description: Send GET /items without parameters and expect 200 with an array of items.\n2. Scenario Name: Filter by known category\n   Scenario Description: Send GET /items?category=tools.\n   Expect 200 and every item in category tools.\n3. Scenario Name: Unknown category\n   Scenario Description: Send GET /items?category=nope and expect 404 with an error message.\n";

    #[test]
    fn fixture_with_three_items() {
        // Hand parse of F1.
        let expected = vec![
            ("List all items", "Send GET /items without parameters and expect 200 with an array of items."),
            ("Filter by known category", "Send GET /items?category=tools.\nExpect 200 and every item in category tools."),
            ("Unknown category", "Send GET /items?category=nope and expect 404 with an error message."),
        ];
        let parsed = parse_scenario_list(F1, ScenarioKind::Unit);
        assert!(parsed.warnings.is_empty());
        assert_eq!(parsed.drafts.len(), 3);
        for (i, (draft, (name, desc))) in parsed.drafts.iter().zip(expected).enumerate() {
            assert_eq!(draft.ordinal, i as u32 + 1);
            assert_eq!(draft.name, name);
            assert_eq!(draft.description, desc);
            assert_eq!(draft.kind, ScenarioKind::Unit);
        }
    }

    #[test]
    fn minimal_form() {
        let parsed = parse_scenario_list("1. Scenario Name: A\n Scenario Description: B", ScenarioKind::Unit);
        assert_eq!(parsed.drafts.len(), 1);
        assert_eq!(parsed.drafts[0].name, "A");
        assert_eq!(parsed.drafts[0].description, "B");
    }

    #[test]
    fn prose_has_no_items() {
        let parsed = parse_scenario_list("Sure! Here are some ideas for testing.", ScenarioKind::Unit);
        assert!(parsed.drafts.is_empty());
    }

    #[test]
    fn skipped_numbering_is_renumbered_with_warning() {
        let text = "1. Scenario Name: A\n   Scenario Description: a\n3. Scenario Name: B\n   Scenario Description: b\n";
        let parsed = parse_scenario_list(text, ScenarioKind::System);
        let ordinals: Vec<u32> = parsed.drafts.iter().map(|d| d.ordinal).collect();
        assert_eq!(ordinals, vec![1, 2]);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn bold_labels_are_tolerated() {
        let text = "1. **Scenario Name:** Create item\n   **Scenario Description:** POST /items then GET /items/{itemId}\n";
        let parsed = parse_scenario_list(text, ScenarioKind::System);
        assert_eq!(parsed.drafts[0].name, "Create item");
        assert_eq!(parsed.drafts[0].description, "POST /items then GET /items/{itemId}");
    }

    fn items_ops() -> Vec<ApiOperation> {
        let text = std::fs::read_to_string(format!(
            "{}/../testkit/fixtures/specs/items.json",
            env!("CARGO_MANIFEST_DIR")
        ))
        .unwrap();
        parse_spec(&text, "items.json").unwrap().operations
    }

    #[test]
    fn links_templates_and_concrete_paths() {
        let ops = items_ops();
        let links = link_operations(
            "Create with post /items, then fetch it via GET /items/42. Finally GET /items.",
            &ops,
        );
        assert_eq!(links.operation_ids, vec!["op2", "op3", "op1"]);
        assert_eq!(links.mentions, 3);
        assert!(links.ambiguous.is_empty());
        assert!(links.unmatched.is_empty());
    }

    #[test]
    fn single_call_and_unknown_path() {
        let ops = items_ops();
        let links = link_operations("Call GET /items/{itemId} and DELETE /items/1", &ops);
        assert_eq!(links.operation_ids, vec!["op3"]);
        assert_eq!(links.unmatched, vec!["DELETE /items/1"]);
    }

    #[test]
    fn equally_good_templates_are_ambiguous() {
        let doc = serde_json::json!({"paths": {
            "/a/{x}": {"get": {"responses": {"200": {"description": ""}}}},
            "/{y}/b": {"get": {"responses": {"200": {"description": ""}}}}
        }});
        let (ops, _) = crate::spec_model::extract_operations(&doc).unwrap();
        let links = link_operations("GET /a/b", &ops);
        assert!(links.operation_ids.is_empty());
        assert_eq!(links.ambiguous, vec!["GET /a/b"]);
    }

    fn arb_draft() -> impl Strategy<Value = (String, String)> {
        let name = "[A-Za-z][A-Za-z0-9 ]{0,20}[A-Za-z0-9]";
        let line = "[a-z][a-z0-9 ,/{}?=]{0,30}[a-z0-9]";
        (name, prop::collection::vec(line, 1..4)).prop_map(|(n, lines)| (n, lines.join("\n")))
    }

    proptest! {
        #[test]
        fn format_then_parse_is_identity(items in prop::collection::vec(arb_draft(), 0..6)) {
            let drafts: Vec<ScenarioDraft> = items
                .into_iter()
                .enumerate()
                .map(|(i, (name, description))| ScenarioDraft {
                    ordinal: i as u32 + 1,
                    name,
                    description,
                    kind: ScenarioKind::Unit,
                })
                .collect();
            let parsed = parse_scenario_list(&format_scenario_list(&drafts), ScenarioKind::Unit);
            prop_assert!(parsed.warnings.is_empty());
            prop_assert_eq!(parsed.drafts, drafts);
        }
    }
}
