//! Chat-completion backend contract.
//!
//! Callers own the [`ChatSession`] history; a backend only ever reads it and
//! returns the assistant's next message. Retry policy lives in [`complete`]
//! so every backend gets the same behaviour.

mod parse;
mod scripted;
mod synthetic;
mod template;

pub use parse::{
    extract_json_object, labeled_value, parse_percentage, parse_probability_json, ParseError,
};
pub use scripted::{FixtureRule, ReplyMode, ScriptedBackend, ScriptedFixture};
pub use synthetic::{SyntheticBackend, SyntheticRates};
pub use template::{PromptTemplate, Rendered, TemplateError};

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

/// A conversation with a chat model: an optional system prompt fixed at
/// construction plus user/assistant messages in insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChatSession {
    system_prompt: Option<String>,
    messages: Vec<Message>,
}

impl ChatSession {
    pub fn new(system_prompt: impl Into<String>) -> Self {
        Self {
            system_prompt: Some(system_prompt.into()),
            messages: Vec::new(),
        }
    }

    /// A one-shot session holding a single user prompt.
    pub fn single(prompt: impl Into<String>) -> Self {
        let mut s = Self::default();
        s.push_user(prompt);
        s
    }

    pub fn system_prompt(&self) -> Option<&str> {
        self.system_prompt.as_deref()
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn last_message(&self) -> Option<&Message> {
        self.messages.last()
    }

    pub fn push_user(&mut self, content: impl Into<String>) {
        self.messages.push(Message {
            role: Role::User,
            content: content.into(),
        });
    }

    pub fn push_assistant(&mut self, content: impl Into<String>) {
        self.messages.push(Message {
            role: Role::Assistant,
            content: content.into(),
        });
    }

    /// System prompt (if any) followed by the history, as sent on the wire.
    pub fn wire_messages(&self) -> Vec<Message> {
        let mut out = Vec::with_capacity(self.messages.len() + 1);
        if let Some(sys) = &self.system_prompt {
            out.push(Message {
                role: Role::System,
                content: sys.clone(),
            });
        }
        out.extend(self.messages.iter().cloned());
        out
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty() && self.system_prompt.is_none()
    }

    /// Drops every message after the first `len`.
    pub fn truncate(&mut self, len: usize) {
        self.messages.truncate(len);
    }
}

/// Nucleus and temperature settings for one call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub top_p: f64,
    pub temperature: f64,
}

impl SamplingParams {
    /// Diverse utterance generation.
    pub const GENERATION: SamplingParams = SamplingParams {
        top_p: 0.7,
        temperature: 0.8,
    };
    /// Precise judging and annotation.
    pub const JUDGE: SamplingParams = SamplingParams {
        top_p: 0.2,
        temperature: 0.3,
    };
}

/// Where and how to reach a chat model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatBackendConfig {
    /// Base URL of an OpenAI-compatible endpoint, or `"scripted"`.
    pub endpoint: String,
    pub model_name: String,
    pub top_p: f64,
    pub temperature: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_retries() -> u32 {
    3
}

fn default_timeout() -> u64 {
    60
}

impl ChatBackendConfig {
    pub fn is_scripted(&self) -> bool {
        self.endpoint == "scripted"
    }

    pub fn params(&self) -> SamplingParams {
        SamplingParams {
            top_p: self.top_p,
            temperature: self.temperature,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..=2.0).contains(&self.top_p) {
            out.push(String::from("top_p must lie in [0,2]"));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            out.push(String::from("temperature must lie in [0,2]"));
        }
        out
    }
}

/// Failure reported by a backend for a single attempt.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    /// Worth retrying (timeouts, 5xx, rate limiting).
    #[error("transient backend failure: {0}")]
    Transient(String),
    /// Retrying cannot help (exhausted script, bad credentials).
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("chat session has no messages")]
    EmptySession,
    #[error("backend unavailable after {attempts} attempt(s): {detail}")]
    BackendUnavailable { attempts: u32, detail: String },
    #[error("backend returned an empty reply")]
    EmptyReply,
}

/// A chat-completion model.
pub trait ChatBackend {
    fn chat(&self, session: &ChatSession, params: SamplingParams) -> Result<String, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn chat(&self, session: &ChatSession, params: SamplingParams) -> Result<String, BackendError> {
        (**self).chat(session, params)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn chat(&self, session: &ChatSession, params: SamplingParams) -> Result<String, BackendError> {
        (**self).chat(session, params)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for Arc<T> {
    fn chat(&self, session: &ChatSession, params: SamplingParams) -> Result<String, BackendError> {
        (**self).chat(session, params)
    }
}

/// Asks the backend for the next assistant message, retrying transient
/// failures up to `max_retries` times. The session is not modified.
pub fn complete(
    backend: &dyn ChatBackend,
    session: &ChatSession,
    params: SamplingParams,
    max_retries: u32,
) -> Result<String, GatewayError> {
    if session.messages().is_empty() {
        return Err(GatewayError::EmptySession);
    }
    let mut attempts = 0;
    loop {
        attempts += 1;
        match backend.chat(session, params) {
            Ok(reply) if reply.trim().is_empty() => return Err(GatewayError::EmptyReply),
            Ok(reply) => return Ok(reply),
            Err(BackendError::Transient(detail)) if attempts > max_retries => {
                return Err(GatewayError::BackendUnavailable { attempts, detail })
            }
            Err(BackendError::Transient(_)) => continue,
            Err(BackendError::Unavailable(detail)) => {
                return Err(GatewayError::BackendUnavailable { attempts, detail })
            }
        }
    }
}

/// One-shot prompt to a judge model.
pub fn ask(
    backend: &dyn ChatBackend,
    prompt: &str,
    params: SamplingParams,
    max_retries: u32,
) -> Result<String, GatewayError> {
    complete(backend, &ChatSession::single(prompt), params, max_retries)
}

/// Removes a leading `"Speaker:"` tag (case-insensitive, optional
/// surrounding whitespace) if present.
pub fn strip_speaker_prefix<'a>(text: &'a str, speaker: &str) -> &'a str {
    let t = text.trim_start();
    if t.len() >= speaker.len() && t[..speaker.len()].eq_ignore_ascii_case(speaker) {
        let rest = t[speaker.len()..].trim_start();
        if let Some(r) = rest.strip_prefix(':') {
            return r.trim();
        }
    }
    text.trim()
}
