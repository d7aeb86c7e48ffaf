//! Service configuration, read from a TOML file.

use std::collections::BTreeMap;
use std::path::Path;

use restbench_core::agents::AgentSettings;
use restbench_core::executor::RunnerConfig;
use restbench_core::llm::LlmConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ServerConfig {
    pub listen: String,
    pub store: StoreConfig,
    pub llm: LlmSection,
    pub runner: RunnerConfig,
    pub agents: AgentSettings,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen: "127.0.0.1:8080".into(),
            store: StoreConfig::default(),
            llm: LlmSection::default(),
            runner: RunnerConfig::default(),
            agents: AgentSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct StoreConfig {
    /// A name registered in the store registry: `memory` or `sqlite`.
    pub kind: String,
    /// Database path for persistent stores.
    pub location: Option<String>,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig { kind: "memory".into(), location: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct LlmSection {
    /// A name registered in the provider registry: `http` or `scripted`.
    pub provider: String,
    /// Provider-specific options, e.g. `table` for the scripted provider.
    pub options: BTreeMap<String, String>,
    pub model: LlmConfig,
}

impl Default for LlmSection {
    fn default() -> Self {
        LlmSection {
            provider: "http".into(),
            options: BTreeMap::new(),
            model: LlmConfig::gpt4o_profile("https://api.openai.com/v1/chat/completions"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("invalid configuration: {0}")]
    Parse(String),
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> Result<ServerConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ServerConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_toml(&text)
    }

    /// Offline setup: scripted completions from `table`, in-memory store.
    pub fn scripted(table: &Path) -> ServerConfig {
        let mut config = ServerConfig::default();
        config.llm.provider = "scripted".into();
        config.llm.options.insert("table".into(), table.display().to_string());
        config.llm.model = LlmConfig::new("scripted://local", "scripted", 0.0);
        config
    }
}
