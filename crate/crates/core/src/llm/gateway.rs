use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use tokio::sync::Semaphore;

use super::templates::DualRolePrompt;

/// Environment variable holding the bearer credential for the chat endpoint.
pub const API_KEY_ENV: &str = "RESTBENCH_LLM_API_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("no response within {timeout_ms} ms after {attempts} attempts")]
    Timeout { attempts: u32, timeout_ms: u64 },
    #[error("endpoint answered HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("endpoint returned an empty completion")]
    EmptyResponse,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),
    #[error("invalid LLM configuration: {0}")]
    Config(String),
    #[error("unknown completion provider {0}")]
    UnknownProvider(String),
    #[error("no scripted response for {template} prompt {hash}")]
    Unmatched { template: String, hash: String },
}

impl LlmError {
    fn is_transient(&self) -> bool {
        match self {
            LlmError::Timeout { .. } | LlmError::Transport(_) => true,
            LlmError::HttpStatus { status, .. } => *status >= 500 || *status == 429,
            _ => false,
        }
    }
}

/// Sampling and transport settings for one provider profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    /// `None` sends no `max_tokens` field.
    #[serde(default)]
    pub max_tokens: Option<u32>,
    pub timeout_seconds: f64,
    #[serde(default = "default_retry_count")]
    pub retry_count: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub retry_backoff_ms: u64,
    #[serde(skip)]
    pub api_key: Option<String>,
}

fn default_retry_count() -> u32 {
    2
}

fn default_parallelism() -> usize {
    4
}

impl LlmConfig {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>, temperature: f64) -> Self {
        LlmConfig {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            temperature,
            max_tokens: None,
            timeout_seconds: 120.0,
            retry_count: default_retry_count(),
            parallelism: default_parallelism(),
            retry_backoff_ms: 0,
            api_key: None,
        }
    }

    /// First provider profile of the evaluation: temperature 0.6.
    pub fn gpt4o_profile(endpoint_url: impl Into<String>) -> Self {
        LlmConfig::new(endpoint_url, "gpt-4o", 0.6)
    }

    /// Second provider profile: temperature 0.0, no token limit.
    pub fn deepseek_reasoner_profile(endpoint_url: impl Into<String>) -> Self {
        LlmConfig::new(endpoint_url, "deepseek-reasoner", 0.0)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::Config(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.timeout_seconds.is_nan() || self.timeout_seconds <= 0.0 {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        if self.max_tokens == Some(0) {
            return Err(LlmError::Config("max-tokens must be positive".into()));
        }
        if self.parallelism == 0 {
            return Err(LlmError::Config("parallelism must be at least 1".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_seconds)
    }

    pub fn with_api_key_from_env(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    /// Model output exactly as received.
    pub text: String,
    pub model_name: String,
    pub latency_ms: u64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

/// A backend that turns one dual-role prompt into one completion.
#[async_trait]
pub trait CompletionProvider: Send + Sync {
    fn name(&self) -> &str;

    async fn complete(&self, prompt: &DualRolePrompt, config: &LlmConfig) -> Result<Completion, LlmError>;
}

/// Request body for the chat-completion wire protocol.
pub fn chat_request_body(prompt: &DualRolePrompt, config: &LlmConfig) -> Value {
    let mut body = json!({
        "model": config.model_name,
        "messages": [
            {"role": "system", "content": prompt.system_message},
            {"role": "user", "content": prompt.user_message},
        ],
        "temperature": config.temperature,
    });
    if let Some(max) = config.max_tokens {
        body["max_tokens"] = json!(max);
    }
    body
}

/// Chat-completion client speaking `{model, messages, temperature, max_tokens?}`.
pub struct HttpChatProvider {
    client: reqwest::Client,
}

impl Default for HttpChatProvider {
    fn default() -> Self {
        HttpChatProvider { client: reqwest::Client::new() }
    }
}

impl HttpChatProvider {
    async fn attempt(&self, body: &Value, config: &LlmConfig) -> Result<(Value, u64), LlmError> {
        let started = Instant::now();
        let mut request = self.client.post(&config.endpoint_url).json(body);
        if let Some(key) = &config.api_key {
            request = request.bearer_auth(key);
        }
        let timeout = config.timeout();
        let timed_out = || LlmError::Timeout { attempts: 1, timeout_ms: timeout.as_millis() as u64 };
        let response = tokio::time::timeout(timeout, request.send())
            .await
            .map_err(|_| timed_out())?
            .map_err(|e| {
                if e.is_timeout() {
                    timed_out()
                } else {
                    LlmError::Transport(e.to_string())
                }
            })?;
        let status = response.status();
        let text = tokio::time::timeout(timeout, response.text())
            .await
            .map_err(|_| timed_out())?
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::HttpStatus { status: status.as_u16(), body: text });
        }
        if text.trim().is_empty() {
            return Err(LlmError::EmptyResponse);
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
        Ok((value, started.elapsed().as_millis() as u64))
    }
}

#[async_trait]
impl CompletionProvider for HttpChatProvider {
    fn name(&self) -> &str {
        "http"
    }

    async fn complete(&self, prompt: &DualRolePrompt, config: &LlmConfig) -> Result<Completion, LlmError> {
        config.validate()?;
        let body = chat_request_body(prompt, config);
        let attempts = config.retry_count + 1;
        let mut last_error = None;
        for attempt in 1..=attempts {
            match self.attempt(&body, config).await {
                Ok((value, latency_ms)) => return completion_from_response(&value, config, latency_ms),
                Err(err) if err.is_transient() && attempt < attempts => {
                    tracing::warn!(attempt, error = %err, "chat completion failed; retrying");
                    last_error = Some(err);
                    if config.retry_backoff_ms > 0 {
                        let delay = config.retry_backoff_ms * u64::from(attempt);
                        tokio::time::sleep(Duration::from_millis(delay)).await;
                    }
                }
                Err(err) => {
                    last_error = Some(err);
                    break;
                }
            }
        }
        Err(match last_error {
            Some(LlmError::Timeout { timeout_ms, .. }) => LlmError::Timeout { attempts, timeout_ms },
            Some(other) => other,
            None => LlmError::Transport("no attempt made".into()),
        })
    }
}

fn completion_from_response(value: &Value, config: &LlmConfig, latency_ms: u64) -> Result<Completion, LlmError> {
    let text = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::MalformedResponse("missing choices[0].message.content".into()))?;
    if text.is_empty() {
        return Err(LlmError::EmptyResponse);
    }
    Ok(Completion {
        text: text.to_string(),
        model_name: value
            .get("model")
            .and_then(Value::as_str)
            .unwrap_or(&config.model_name)
            .to_string(),
        latency_ms,
        prompt_tokens: value.pointer("/usage/prompt_tokens").and_then(Value::as_u64),
        completion_tokens: value.pointer("/usage/completion_tokens").and_then(Value::as_u64),
    })
}

/// Settings handed to a provider factory: the provider name plus free-form
/// options from the config file.
#[derive(Debug, Clone, Default)]
pub struct ProviderSettings {
    pub options: BTreeMap<String, String>,
}

pub type ProviderFactory =
    Box<dyn Fn(&ProviderSettings) -> Result<Arc<dyn CompletionProvider>, LlmError> + Send + Sync>;

/// Completion providers registered by name and selected from configuration.
pub struct ProviderRegistry {
    factories: BTreeMap<String, ProviderFactory>,
}

impl Default for ProviderRegistry {
    fn default() -> Self {
        let mut registry = ProviderRegistry { factories: BTreeMap::new() };
        registry.register("http", Box::new(|_| Ok(Arc::new(HttpChatProvider::default()))));
        registry
    }
}

impl ProviderRegistry {
    pub fn register(&mut self, name: &str, factory: ProviderFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, name: &str, settings: &ProviderSettings) -> Result<Arc<dyn CompletionProvider>, LlmError> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| LlmError::UnknownProvider(name.to_string()))?;
        factory(settings)
    }
}

/// Provider plus configuration, with a bound on in-flight calls.
#[derive(Clone)]
pub struct LlmGateway {
    provider: Arc<dyn CompletionProvider>,
    config: LlmConfig,
    permits: Arc<Semaphore>,
}

impl LlmGateway {
    pub fn new(provider: Arc<dyn CompletionProvider>, config: LlmConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let permits = Arc::new(Semaphore::new(config.parallelism));
        Ok(LlmGateway { provider, config, permits })
    }

    pub fn config(&self) -> &LlmConfig {
        &self.config
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    pub async fn complete(&self, prompt: &DualRolePrompt) -> Result<Completion, LlmError> {
        let _permit = self.permits.acquire().await.expect("semaphore never closed");
        self.provider.complete(prompt, &self.config).await
    }
}
