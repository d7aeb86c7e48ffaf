//! Prompt templates and the chat-completion gateway.

mod gateway;
mod templates;

pub use gateway::{
    chat_request_body, Completion, CompletionProvider, HttpChatProvider, LlmConfig, LlmError, LlmGateway,
    ProviderFactory, ProviderRegistry, ProviderSettings, API_KEY_ENV,
};
pub use templates::{
    DualRolePrompt, PromptTemplate, RenderedPrompt, TemplateError, TemplateName, TemplateStore,
    SHIPPED_TEMPLATES,
};
