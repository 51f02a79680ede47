use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{Backend, GatewayError, PromptRequest};

#[derive(Debug, Clone)]
pub struct HttpSettings {
    /// Full chat-completions URL, e.g. `https://api.openai.com/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Extra tries after the first on transport errors, 429 and 5xx.
    pub transport_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
}

impl HttpSettings {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpSettings {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            timeout: Duration::from_secs(120),
            transport_retries: 3,
            initial_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

/// Blocking client for chat-completion-style endpoints.
pub struct HttpBackend {
    settings: HttpSettings,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

enum Failure {
    Retryable(String, Option<Duration>),
    Fatal(String),
}

impl HttpBackend {
    pub fn new(settings: HttpSettings) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(HttpBackend { settings, client })
    }

    /// JSON body sent for `req`.
    pub fn request_body(&self, req: &PromptRequest) -> serde_json::Value {
        let mut messages = Vec::new();
        if !req.system_text.is_empty() {
            messages.push(json!({"role": "system", "content": req.system_text}));
        }
        messages.push(json!({"role": "user", "content": req.user_text}));
        json!({
            "model": self.settings.model,
            "messages": messages,
            "temperature": req.params.effective_temperature(),
            "max_tokens": req.params.max_output_tokens,
        })
    }

    fn send_once(&self, body: &serde_json::Value) -> Result<String, Failure> {
        let mut builder = self.client.post(&self.settings.endpoint).json(body);
        if let Some(key) = &self.settings.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| Failure::Retryable(e.to_string(), None))?;
        let status = response.status();
        if status.is_success() {
            let parsed: ChatResponse =
                response.json().map_err(|e| Failure::Fatal(format!("undecodable response body: {e}")))?;
            return parsed
                .choices
                .into_iter()
                .next()
                .and_then(|c| c.message.content)
                .ok_or_else(|| Failure::Fatal("response has no message content".into()));
        }
        let retry_after = response
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = response.text().unwrap_or_default();
        let message = format!("HTTP {status}: {}", text.chars().take(300).collect::<String>());
        if status.as_u16() == 429 || status.is_server_error() {
            Err(Failure::Retryable(message, retry_after))
        } else {
            Err(Failure::Fatal(message))
        }
    }
}

impl Backend for HttpBackend {
    fn complete(&self, backend_name: &str, req: &PromptRequest, _attempt: u32) -> Result<String, GatewayError> {
        let body = self.request_body(req);
        let mut backoff = self.settings.initial_backoff;
        let tries = self.settings.transport_retries + 1;
        let mut last = String::new();
        for n in 1..=tries {
            match self.send_once(&body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(message)) => {
                    return Err(GatewayError::Transport { backend: backend_name.to_string(), attempts: n, message })
                }
                Err(Failure::Retryable(message, retry_after)) => {
                    tracing::warn!(backend = backend_name, try_number = n, error = %message, "retrying request");
                    last = message;
                    if n < tries {
                        let wait = retry_after.unwrap_or(backoff).min(self.settings.max_backoff);
                        std::thread::sleep(wait);
                        backoff = (backoff * 2).min(self.settings.max_backoff);
                    }
                }
            }
        }
        Err(GatewayError::Transport { backend: backend_name.to_string(), attempts: tries, message: last })
    }
}
