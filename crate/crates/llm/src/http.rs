use std::time::{Duration, Instant};

use async_trait::async_trait;
use counsel_core::prompt::PromptBundle;
use serde::Deserialize;
use serde_json::{json, Value};

use super::retry::{retry_with_backoff, Attempt};
use super::{BackendEndpoint, CompletionBackend, CompletionResult, LlmError};

/// JSON request body for `bundle` in the endpoint's dialect.
pub fn request_body(endpoint: &BackendEndpoint, bundle: &PromptBundle) -> Value {
    let cfg = &bundle.config;
    let mut body = json!({
        "model": endpoint.model_name,
        "messages": bundle.to_messages(),
        "temperature": cfg.temperature,
        "top_p": cfg.top_p,
        "max_tokens": cfg.max_tokens,
        "stream": false,
    });
    body[endpoint.dialect.penalty_key()] = json!(cfg.repetition_penalty);
    body
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

fn first_choice_text(raw: &str) -> Result<String, LlmError> {
    let parsed: ChatResponse =
        serde_json::from_str(raw).map_err(|e| LlmError::Protocol(format!("unparseable response: {e}")))?;
    let text = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::Protocol("response has no choices".into()))?
        .message
        .content
        .unwrap_or_default();
    if text.trim().is_empty() {
        return Err(LlmError::Protocol("empty completion".into()));
    }
    Ok(text.trim().to_string())
}

/// Chat-completion client over HTTP(S). Cheap to clone and share.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    endpoint: BackendEndpoint,
    client: reqwest::Client,
}

impl HttpBackend {
    pub fn new(endpoint: BackendEndpoint) -> Result<Self, LlmError> {
        endpoint.validate()?;
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(endpoint.timeout_ms))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(HttpBackend { endpoint, client })
    }

    pub fn endpoint(&self) -> &BackendEndpoint {
        &self.endpoint
    }

    async fn attempt(&self, url: &str, body: &Value) -> Attempt<String> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.endpoint.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send().await {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Transient(format!("timed out: {e}")),
            Err(e) if e.is_connect() || e.is_request() => return Attempt::Transient(format!("transport: {e}")),
            Err(e) => return Attempt::Fatal(LlmError::Protocol(e.to_string())),
        };
        let status = resp.status();
        let text = match resp.text().await {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Transient(format!("timed out reading body: {e}")),
            Err(e) => return Attempt::Transient(format!("reading body: {e}")),
        };
        if status.is_server_error() || status.as_u16() == 429 {
            return Attempt::Transient(format!("status {status}: {}", snippet(&text)));
        }
        if !status.is_success() {
            return Attempt::Fatal(LlmError::Request {
                status: status.as_u16(),
                body: snippet(&text),
            });
        }
        match first_choice_text(&text) {
            Ok(t) => Attempt::Done(t),
            Err(e) => Attempt::Fatal(e),
        }
    }
}

fn snippet(s: &str) -> String {
    s.chars().take(300).collect()
}

#[async_trait]
impl CompletionBackend for HttpBackend {
    async fn complete(&self, bundle: &PromptBundle) -> Result<CompletionResult, LlmError> {
        let url = self.endpoint.completions_url();
        let body = request_body(&self.endpoint, bundle);
        let started = Instant::now();
        let (text, attempt_count) = retry_with_backoff(self.endpoint.backoff, self.endpoint.max_retries, |_| {
            self.attempt(&url, &body)
        })
        .await?;
        Ok(CompletionResult {
            text,
            latency_ms: started.elapsed().as_millis() as u64,
            attempt_count,
        })
    }

    fn describe(&self) -> String {
        format!("http:{}#{}", self.endpoint.base_url, self.endpoint.model_name)
    }
}
