//! A completion provider that answers from a routing table instead of a
//! model. Rules are tried in order and the first match wins.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use restbench_core::llm::{
    Completion, CompletionProvider, DualRolePrompt, LlmConfig, LlmError, ProviderRegistry, TemplateName,
};
use serde::{Deserialize, Serialize};

/// Condition on one binding of the rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BindingPredicate {
    Contains { name: String, needle: String },
    Equals { name: String, value: String },
}

impl BindingPredicate {
    fn holds(&self, bindings: &BTreeMap<String, String>) -> bool {
        match self {
            BindingPredicate::Contains { name, needle } => bindings.get(name).is_some_and(|v| v.contains(needle)),
            BindingPredicate::Equals { name, value } => bindings.get(name) == Some(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    /// Store key of the template, e.g. `generate_test_case_prompt`.
    #[serde(default)]
    pub template: Option<String>,
    #[serde(default)]
    pub when: Vec<BindingPredicate>,
    #[serde(default)]
    pub prompt_hash: Option<String>,
    /// Returned verbatim after `{{binding}}` substitution.
    pub response: String,
}

impl Rule {
    pub fn new(template: TemplateName, response: impl Into<String>) -> Rule {
        Rule { template: Some(template.store_key().to_string()), when: Vec::new(), prompt_hash: None, response: response.into() }
    }

    pub fn when_contains(mut self, name: &str, needle: &str) -> Rule {
        self.when.push(BindingPredicate::Contains { name: name.into(), needle: needle.into() });
        self
    }

    fn matches(&self, prompt: &DualRolePrompt, hash: &str) -> bool {
        self.template.as_deref().is_none_or(|t| t == prompt.template.store_key())
            && self.prompt_hash.as_deref().is_none_or(|h| h == hash)
            && self.when.iter().all(|p| p.holds(&prompt.bindings_used))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    #[default]
    Error,
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RoutingTable {
    pub rules: Vec<Rule>,
    #[serde(default)]
    pub fallback: Fallback,
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("invalid routing table: {0}")]
    Parse(String),
}

/// Rules as written on disk: `response_file` is resolved relative to the
/// table file.
#[derive(Deserialize)]
struct FileRule {
    #[serde(default)]
    template: Option<String>,
    #[serde(default)]
    when: Vec<BindingPredicate>,
    #[serde(default)]
    prompt_hash: Option<String>,
    #[serde(default)]
    response: Option<String>,
    #[serde(default)]
    response_file: Option<String>,
}

#[derive(Deserialize)]
struct FileTable {
    rules: Vec<FileRule>,
    #[serde(default)]
    fallback: Fallback,
}

impl RoutingTable {
    pub fn load(path: &Path) -> Result<RoutingTable, TableError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| TableError::Io { path: p.display().to_string(), reason: e.to_string() })
        };
        let file: FileTable = serde_json::from_str(&read(path)?).map_err(|e| TableError::Parse(e.to_string()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut rules = Vec::with_capacity(file.rules.len());
        for rule in file.rules {
            let response = match (rule.response, rule.response_file) {
                (Some(text), None) => text,
                (None, Some(file)) => read(&dir.join(file))?,
                _ => return Err(TableError::Parse("each rule needs exactly one of response, response_file".into())),
            };
            rules.push(Rule { template: rule.template, when: rule.when, prompt_hash: rule.prompt_hash, response });
        }
        Ok(RoutingTable { rules, fallback: file.fallback })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRecord {
    pub template: TemplateName,
    pub prompt_hash: String,
    /// Index of the rule that answered, `None` when unmatched.
    pub rule: Option<usize>,
}

pub struct ScriptedResponder {
    table: RoutingTable,
    calls: Mutex<Vec<CallRecord>>,
}

/// Replaces `{{name}}` with the binding's value; unknown names stay as-is.
fn interpolate(text: &str, bindings: &BTreeMap<String, String>) -> String {
    let mut out = text.to_string();
    for (name, value) in bindings {
        out = out.replace(&format!("{{{{{name}}}}}"), value);
    }
    out
}

impl ScriptedResponder {
    pub fn new(table: RoutingTable) -> ScriptedResponder {
        ScriptedResponder { table, calls: Mutex::new(Vec::new()) }
    }

    pub fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().unwrap().clone()
    }

    pub fn unmatched(&self) -> Vec<CallRecord> {
        self.calls().into_iter().filter(|c| c.rule.is_none()).collect()
    }

    pub fn respond(&self, prompt: &DualRolePrompt) -> Result<String, LlmError> {
        let hash = prompt.hash();
        let rule = self.table.rules.iter().position(|r| r.matches(prompt, &hash));
        self.calls.lock().unwrap().push(CallRecord { template: prompt.template, prompt_hash: hash.clone(), rule });
        match (rule, &self.table.fallback) {
            (Some(i), _) => Ok(interpolate(&self.table.rules[i].response, &prompt.bindings_used)),
            (None, Fallback::Text(text)) => Ok(text.clone()),
            (None, Fallback::Error) => {
                Err(LlmError::Unmatched { template: prompt.template.store_key().to_string(), hash })
            }
        }
    }
}

#[async_trait]
impl CompletionProvider for ScriptedResponder {
    fn name(&self) -> &str {
        "scripted"
    }

    async fn complete(&self, prompt: &DualRolePrompt, config: &LlmConfig) -> Result<Completion, LlmError> {
        let text = self.respond(prompt)?;
        Ok(Completion {
            text,
            model_name: config.model_name.clone(),
            latency_ms: 0,
            prompt_tokens: None,
            completion_tokens: None,
        })
    }
}

/// Adds the `scripted` provider, which reads its routing table from the
/// `table` option.
pub fn register(registry: &mut ProviderRegistry) {
    registry.register(
        "scripted",
        Box::new(|settings| {
            let path = settings
                .options
                .get("table")
                .ok_or_else(|| LlmError::Config("the scripted provider needs a table option".into()))?;
            let table = RoutingTable::load(Path::new(path)).map_err(|e| LlmError::Config(e.to_string()))?;
            Ok(Arc::new(ScriptedResponder::new(table)) as Arc<dyn CompletionProvider>)
        }),
    );
}
