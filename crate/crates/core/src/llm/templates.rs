//! The dual-role prompt templates and their on-disk store.
//!
//! The store is a small YAML subset: each template is a top-level key holding a
//! `system: |` and a `user: |` literal block indented by four spaces. Parsing and
//! serializing are exact inverses on well-formed files, which is what lets the
//! shipped file be checked byte-for-byte.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SHIPPED_TEMPLATES: &str = include_str!("../../templates/prompts.yaml");

const BLOCK_INDENT: &str = "    ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    GenerateTestCase,
    GenerateTestScenario,
    GenerateSystemScenario,
    CheckParameterTypeCorrectness,
    CheckStatusCodeCoverageByScript,
    CheckStatusCodeCoverageByExecutionResults,
    CheckMethodCoverage,
}

impl TemplateName {
    pub const ALL: [TemplateName; 7] = [
        TemplateName::GenerateTestCase,
        TemplateName::GenerateTestScenario,
        TemplateName::GenerateSystemScenario,
        TemplateName::CheckParameterTypeCorrectness,
        TemplateName::CheckStatusCodeCoverageByScript,
        TemplateName::CheckStatusCodeCoverageByExecutionResults,
        TemplateName::CheckMethodCoverage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::GenerateTestCase => "generate_test_case",
            TemplateName::GenerateTestScenario => "generate_test_scenario",
            TemplateName::GenerateSystemScenario => "generate_system_scenario",
            TemplateName::CheckParameterTypeCorrectness => "check_parameter_type_correctness",
            TemplateName::CheckStatusCodeCoverageByScript => "check_status_code_coverage_by_script",
            TemplateName::CheckStatusCodeCoverageByExecutionResults => {
                "check_status_code_coverage_by_execution_results"
            }
            TemplateName::CheckMethodCoverage => "check_method_coverage",
        }
    }

    /// Key used for this template in the store file.
    pub fn store_key(self) -> &'static str {
        match self {
            TemplateName::GenerateTestCase => "generate_test_case_prompt",
            TemplateName::GenerateTestScenario => "generate_test_scenario_prompt",
            TemplateName::GenerateSystemScenario => "generate_system_scenario_prompt",
            other => other.as_str(),
        }
    }

    pub fn variables(self) -> &'static [&'static str] {
        match self {
            TemplateName::GenerateTestCase => &["selected_apis", "server_host", "selected_scenarios"],
            TemplateName::GenerateTestScenario | TemplateName::GenerateSystemScenario => {
                &["selected_apis"]
            }
            TemplateName::CheckParameterTypeCorrectness
            | TemplateName::CheckStatusCodeCoverageByScript
            | TemplateName::CheckMethodCoverage => &["selected_apis", "scenario", "generated_script"],
            TemplateName::CheckStatusCodeCoverageByExecutionResults => {
                &["selected_apis", "scenario", "execution_result"]
            }
        }
    }

    pub fn from_store_key(key: &str) -> Option<TemplateName> {
        TemplateName::ALL
            .into_iter()
            .find(|t| t.store_key() == key || t.as_str() == key)
    }
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown template key {0}")]
    UnknownTemplate(String),
    #[error("template {0} is missing from the store")]
    MissingTemplate(TemplateName),
    #[error("template {template} uses undeclared placeholder {placeholder}")]
    UndeclaredPlaceholder { template: TemplateName, placeholder: String },
    #[error("unbound variable {0}")]
    UnboundVariable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub system_text: String,
    pub user_text: String,
}

impl PromptTemplate {
    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for segment in scan(&self.user_text) {
            if let Segment::Placeholder(name) = segment {
                if !names.iter().any(|n| n == name) {
                    names.push(name.to_string());
                }
            }
        }
        names
    }

    /// Substitutes every `{{name}}` in the user text. The system text is passed
    /// through. Bindings the template does not use are reported as warnings.
    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<RenderedPrompt, TemplateError> {
        let mut user = String::with_capacity(self.user_text.len());
        let mut used = BTreeMap::new();
        for segment in scan(&self.user_text) {
            match segment {
                Segment::Text(text) => user.push_str(text),
                Segment::Placeholder(name) => {
                    let value = bindings
                        .get(name)
                        .ok_or_else(|| TemplateError::UnboundVariable(name.to_string()))?;
                    user.push_str(value);
                    used.insert(name.to_string(), value.clone());
                }
            }
        }
        let warnings = bindings
            .keys()
            .filter(|k| !used.contains_key(*k))
            .map(|k| format!("binding {k} is not used by template {}", self.name))
            .collect();
        Ok(RenderedPrompt {
            prompt: DualRolePrompt {
                template: self.name,
                system_message: self.system_text.clone(),
                user_message: user,
                bindings_used: used,
            },
            warnings,
        })
    }
}

enum Segment<'a> {
    Text(&'a str),
    Placeholder(&'a str),
}

fn is_placeholder_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits template text into literal runs and `{{name}}` placeholders. Brace
/// pairs whose content is not an identifier stay literal.
fn scan(text: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) if is_placeholder_name(&after[..close]) => {
                if open > 0 {
                    out.push(Segment::Text(&rest[..open]));
                }
                out.push(Segment::Placeholder(&after[..close]));
                rest = &after[close + 2..];
            }
            _ => {
                out.push(Segment::Text(&rest[..open + 2]));
                rest = after;
            }
        }
    }
    if !rest.is_empty() {
        out.push(Segment::Text(rest));
    }
    out
}

/// A prompt ready to send: one system message and one user message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualRolePrompt {
    pub template: TemplateName,
    pub system_message: String,
    pub user_message: String,
    pub bindings_used: BTreeMap<String, String>,
}

impl DualRolePrompt {
    /// Stable content hash over both messages.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.system_message.as_bytes());
        hasher.update([0u8]);
        hasher.update(self.user_message.as_bytes());
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPrompt {
    pub prompt: DualRolePrompt,
    pub warnings: Vec<String>,
}

/// The seven templates, in store-file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateStore {
    templates: Vec<PromptTemplate>,
}

impl TemplateStore {
    pub fn shipped() -> TemplateStore {
        TemplateStore::parse(SHIPPED_TEMPLATES).expect("shipped template store is well-formed")
    }

    pub fn get(&self, name: TemplateName) -> &PromptTemplate {
        self.templates
            .iter()
            .find(|t| t.name == name)
            .expect("store holds every template")
    }

    pub fn templates(&self) -> &[PromptTemplate] {
        &self.templates
    }

    pub fn render(
        &self,
        name: TemplateName,
        bindings: &BTreeMap<String, String>,
    ) -> Result<RenderedPrompt, TemplateError> {
        self.get(name).render(bindings)
    }

    pub fn parse(text: &str) -> Result<TemplateStore, TemplateError> {
        let lines: Vec<&str> = text.split('\n').collect();
        // A trailing newline leaves one empty element that is not a line.
        let lines = match lines.last() {
            Some(&"") => &lines[..lines.len() - 1],
            _ => &lines[..],
        };
        let mut templates = Vec::new();
        let mut i = 0;
        while i < lines.len() {
            let line = lines[i];
            if line.is_empty() {
                i += 1;
                continue;
            }
            let key = line.strip_suffix(':').filter(|k| !k.starts_with(' ')).ok_or_else(|| {
                TemplateError::Syntax { line: i + 1, message: format!("expected template key, found {line:?}") }
            })?;
            let name = TemplateName::from_store_key(key)
                .ok_or_else(|| TemplateError::UnknownTemplate(key.to_string()))?;
            i += 1;
            let (system_text, next) = parse_block(lines, i, "  system: |")?;
            let (user_text, next) = parse_block(lines, next, "  user: |")?;
            i = next;
            let template = PromptTemplate { name, system_text, user_text };
            for placeholder in template.placeholders() {
                if !name.variables().contains(&placeholder.as_str()) {
                    return Err(TemplateError::UndeclaredPlaceholder { template: name, placeholder });
                }
            }
            templates.push(template);
        }
        for name in TemplateName::ALL {
            if !templates.iter().any(|t| t.name == name) {
                return Err(TemplateError::MissingTemplate(name));
            }
        }
        Ok(TemplateStore { templates })
    }

    /// Inverse of [`TemplateStore::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.templates {
            out.push_str(t.name.store_key());
            out.push_str(":\n");
            write_block(&mut out, "  system: |", &t.system_text);
            write_block(&mut out, "  user: |", &t.user_text);
            out.push('\n');
        }
        out
    }
}

/// Reads a literal block with clip chomping: the text keeps exactly one
/// trailing newline and interior empty lines.
fn parse_block(lines: &[&str], start: usize, header: &str) -> Result<(String, usize), TemplateError> {
    match lines.get(start) {
        Some(line) if *line == header => {}
        other => {
            return Err(TemplateError::Syntax {
                line: start + 1,
                message: format!("expected {header:?}, found {:?}", other.copied().unwrap_or("")),
            })
        }
    }
    let mut body: Vec<&str> = Vec::new();
    let mut i = start + 1;
    while i < lines.len() {
        let line = lines[i];
        if let Some(content) = line.strip_prefix(BLOCK_INDENT) {
            body.push(content);
        } else if line.trim().is_empty() {
            body.push("");
        } else {
            break;
        }
        i += 1;
    }
    while body.last() == Some(&"") {
        body.pop();
    }
    if body.is_empty() {
        return Err(TemplateError::Syntax { line: start + 1, message: "empty block".into() });
    }
    let mut text = body.join("\n");
    text.push('\n');
    Ok((text, i))
}

fn write_block(out: &mut String, header: &str, text: &str) {
    out.push_str(header);
    out.push('\n');
    for line in text.strip_suffix('\n').unwrap_or(text).split('\n') {
        if !line.is_empty() {
            out.push_str(BLOCK_INDENT);
            out.push_str(line);
        }
        out.push('\n');
    }
}
