//! Chat-completion client abstraction and the HTTP implementation.

use std::time::Duration;

use crate::error::{Error, Result};

/// Environment variable the API key is read from. Keys never appear in
/// config files or logs.
pub const API_KEY_ENV: &str = "TEXTQ_API_KEY";

#[derive(Clone)]
pub struct LlmConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint_url: String,
    pub model_name: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub temperature: f64,
}

impl LlmConfig {
    /// Config with the key sourced from [`API_KEY_ENV`], temperature 0,
    /// a 60 s timeout and 2 retries.
    pub fn from_env(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        LlmConfig {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            timeout: Duration::from_secs(60),
            max_retries: 2,
            temperature: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout.is_zero() {
            return Err(Error::Invalid("llm timeout must be positive".into()));
        }
        if self.endpoint_url.is_empty() {
            return Err(Error::Invalid("llm endpoint_url is empty".into()));
        }
        Ok(())
    }
}

impl std::fmt::Debug for LlmConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmConfig")
            .field("endpoint_url", &self.endpoint_url)
            .field("model_name", &self.model_name)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("timeout", &self.timeout)
            .field("max_retries", &self.max_retries)
            .field("temperature", &self.temperature)
            .finish()
    }
}

/// One completion request. The instance id keys results and error
/// reporting; the raw instance text rides along so ledger-backed offline
/// clients can answer without re-parsing the prompt.
#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub instance_id: &'a str,
    pub prompt: &'a str,
    pub instance_text: &'a str,
}

/// A service that answers one user message with one assistant message.
pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String>;
}

/// Blocking HTTP client for an OpenAI-style chat-completions endpoint.
///
/// Sends a single user message per call; transient failures (transport
/// errors, 429, 5xx) are retried up to `max_retries` times with linear
/// backoff. A retry replaces the previous attempt, so no correction is
/// ever applied twice.
pub struct HttpChatClient {
    config: LlmConfig,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    pub fn new(config: LlmConfig) -> Result<Self> {
        config.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::Invalid(format!("http client: {e}")))?;
        Ok(HttpChatClient { config, http })
    }

    fn attempt(&self, request: &ChatRequest<'_>) -> std::result::Result<String, String> {
        let body = serde_json::json!({
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let mut req = self.http.post(&self.config.endpoint_url).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| format!("transport: {e}"))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(format!("retryable status {status}"));
        }
        if !status.is_success() {
            // Non-retryable client error: surface the body.
            let body = resp.text().unwrap_or_default();
            return Err(format!("status {status}: {}", body.chars().take(200).collect::<String>()));
        }
        let value: serde_json::Value = resp.json().map_err(|e| format!("bad json: {e}"))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or_else(|| "response missing choices[0].message.content".to_string())
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String> {
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(200 * u64::from(attempt)));
            }
            match self.attempt(request) {
                Ok(content) => return Ok(content),
                Err(msg) => {
                    let retryable =
                        msg.starts_with("transport:") || msg.starts_with("retryable");
                    last = msg;
                    if !retryable {
                        break;
                    }
                }
            }
        }
        Err(Error::Llm {
            instance_id: request.instance_id.to_string(),
            message: last,
        })
    }
}
