//! Completion backends for assembled prompt bundles.
//!
//! [`HttpBackend`] speaks the common chat-completion JSON protocol
//! (`POST {base_url}/chat/completions`) with retry and exponential backoff.
//! [`MockBackend`] answers deterministically from a hash of the bundle.

mod http;
mod mock;
mod retry;

use std::fmt;
use std::str::FromStr;

use async_trait::async_trait;
use counsel_core::prompt::PromptBundle;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{request_body, HttpBackend};
pub use mock::{mock_complete, MockBackend, MOCK_GREETING};
pub use retry::{retry_with_backoff, Attempt, BackoffPolicy};

/// Environment variable read for the bearer token.
pub const API_KEY_ENV: &str = "COUNSEL_API_KEY";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    /// Transient failures persisted through every allowed attempt.
    #[error("backend failed after {attempts} attempt(s): {cause}")]
    Backend { attempts: u32, cause: String },
    /// The backend rejected the request; retrying would not help.
    #[error("backend rejected the request with status {status}: {body}")]
    Request { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

impl LlmError {
    pub fn code(&self) -> &'static str {
        match self {
            LlmError::Backend { .. } => "backend",
            LlmError::Request { .. } => "request",
            LlmError::Protocol(_) => "protocol",
            LlmError::Config(_) => "configuration",
        }
    }

    pub fn retriable(&self) -> bool {
        matches!(self, LlmError::Backend { .. })
    }
}

/// Which request key carries the repetition penalty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    /// `repetition_penalty` (vLLM, TGI and similar servers).
    #[default]
    OpenaiLike,
    /// `repeat_penalty` (llama.cpp server).
    LlamaServer,
}

impl Dialect {
    pub fn penalty_key(&self) -> &'static str {
        match self {
            Dialect::OpenaiLike => "repetition_penalty",
            Dialect::LlamaServer => "repeat_penalty",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Dialect::OpenaiLike => "openai_like",
            Dialect::LlamaServer => "llama_server",
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dialect {
    type Err = LlmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "openai_like" => Ok(Dialect::OpenaiLike),
            "llama_server" => Ok(Dialect::LlamaServer),
            other => Err(LlmError::Config(format!("unknown dialect {other:?}"))),
        }
    }
}

#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendEndpoint {
    pub base_url: String,
    pub model_name: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    #[serde(default)]
    pub dialect: Dialect,
    #[serde(default)]
    pub backoff: BackoffPolicy,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl fmt::Debug for BackendEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackendEndpoint")
            .field("base_url", &self.base_url)
            .field("model_name", &self.model_name)
            .field("timeout_ms", &self.timeout_ms)
            .field("max_retries", &self.max_retries)
            .field("dialect", &self.dialect)
            .field("backoff", &self.backoff)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl BackendEndpoint {
    pub const DEFAULT_TIMEOUT_MS: u64 = 60_000;
    pub const DEFAULT_MAX_RETRIES: u32 = 2;

    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        BackendEndpoint {
            base_url: base_url.into(),
            model_name: model_name.into(),
            timeout_ms: Self::DEFAULT_TIMEOUT_MS,
            max_retries: Self::DEFAULT_MAX_RETRIES,
            dialect: Dialect::default(),
            backoff: BackoffPolicy::default(),
            api_key: None,
        }
    }

    /// Picks up the bearer token from [`API_KEY_ENV`] when set and non-empty.
    pub fn with_env_api_key(mut self) -> Self {
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.trim().is_empty() {
                self.api_key = Some(key);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(LlmError::Config(format!(
                "base_url must be http(s), got {:?}",
                self.base_url
            )));
        }
        if self.model_name.trim().is_empty() {
            return Err(LlmError::Config("model_name is empty".into()));
        }
        if self.timeout_ms == 0 {
            return Err(LlmError::Config("timeout_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

#[async_trait]
pub trait CompletionBackend: Send + Sync {
    async fn complete(&self, bundle: &PromptBundle) -> Result<CompletionResult, LlmError>;

    /// Short label recorded in run manifests.
    fn describe(&self) -> String;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_validation() {
        assert!(BackendEndpoint::new("http://localhost:8080/v1", "m").validate().is_ok());
        assert!(BackendEndpoint::new("localhost:8080", "m").validate().is_err());
        assert!(BackendEndpoint::new("http://x", " ").validate().is_err());
        let mut e = BackendEndpoint::new("http://x", "m");
        e.timeout_ms = 0;
        assert!(e.validate().is_err());
        assert_eq!(
            BackendEndpoint::new("http://x/v1/", "m").completions_url(),
            "http://x/v1/chat/completions"
        );
    }

    #[test]
    fn api_key_is_not_printed_or_serialized() {
        let mut e = BackendEndpoint::new("http://x", "m");
        e.api_key = Some("sekrit".into());
        assert!(!format!("{e:?}").contains("sekrit"));
        assert!(!serde_json::to_string(&e).unwrap().contains("sekrit"));
    }

    #[test]
    fn dialect_keys() {
        assert_eq!(Dialect::OpenaiLike.penalty_key(), "repetition_penalty");
        assert_eq!("llama_server".parse::<Dialect>().unwrap().penalty_key(), "repeat_penalty");
        assert!("ollama".parse::<Dialect>().is_err());
    }
}
