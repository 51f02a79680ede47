//! Chat-completion access: a live HTTP backend, a replayable scripted
//! backend, retry-on-unparseable-output, and a per-backend concurrency cap.

mod http;
mod script;

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpSettings};
pub use script::{load_script, request_digest, FnBackend, Recorder, ScriptStore, ScriptedBackend};

/// Retry budget for unparseable completions when the caller does not set one.
pub const DEFAULT_MAX_PARSE_ATTEMPTS: u32 = 3;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend {backend}: transport failure after {attempts} tries: {message}")]
    Transport { backend: String, attempts: u32, message: String },
    #[error("backend {backend}: no scripted response for digest {digest} (tag {tag:?}, attempt {attempt})")]
    MissingScript { backend: String, digest: String, tag: String, attempt: u32 },
    #[error("backend {backend}: output still unparseable after {attempts} attempts: {last_error}")]
    ParseExhausted { backend: String, attempts: u32, last_text: String, last_error: String },
    #[error("script line {line}: {message}")]
    ScriptFormat { line: usize, message: String },
    #[error("script lines {first_line} and {second_line} share digest {digest}")]
    DuplicateDigest { digest: String, first_line: usize, second_line: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// When set, callers send temperature 0 regardless of `temperature`.
    pub greedy: bool,
}

impl DecodingParams {
    /// Sampling settings for annotation calls.
    pub const fn annotation() -> Self {
        DecodingParams { temperature: 0.5, max_output_tokens: 2048, greedy: false }
    }

    /// Greedy decoding, 500 output tokens, for extraction calls.
    pub const fn extraction() -> Self {
        DecodingParams { temperature: 0.0, max_output_tokens: 500, greedy: true }
    }

    pub fn effective_temperature(&self) -> f64 {
        if self.greedy {
            0.0
        } else {
            self.temperature
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature must be a non-negative number, got {}",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_output_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub system_text: String,
    pub user_text: String,
    pub params: DecodingParams,
    /// Caller label; part of the replay digest.
    pub tag: String,
}

impl PromptRequest {
    pub fn new(user_text: impl Into<String>, params: DecodingParams, tag: impl Into<String>) -> Self {
        PromptRequest { system_text: String::new(), user_text: user_text.into(), params, tag: tag.into() }
    }

    pub fn with_system(mut self, system_text: impl Into<String>) -> Self {
        self.system_text = system_text.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub backend_name: String,
    pub attempt: u32,
}

/// Something that turns a prompt into text. `attempt` starts at 1.
pub trait Backend: Send + Sync {
    fn complete(&self, backend_name: &str, req: &PromptRequest, attempt: u32) -> Result<String, GatewayError>;
}

/// Counting semaphore bounding in-flight calls, with a high-water mark so
/// tests can observe the cap.
#[derive(Debug)]
struct Limiter {
    cap: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
    peak: AtomicUsize,
}

impl Limiter {
    fn new(cap: usize) -> Self {
        Limiter { cap: cap.max(1), in_flight: Mutex::new(0), freed: Condvar::new(), peak: AtomicUsize::new(0) }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        self.peak.fetch_max(*n, Ordering::SeqCst);
        Permit(self)
    }
}

struct Permit<'a>(&'a Limiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// A named backend plus its concurrency cap. Cheap to clone; clones share
/// the same cap.
#[derive(Clone)]
pub struct LlmClient {
    name: String,
    backend: Arc<dyn Backend>,
    limiter: Arc<Limiter>,
}

impl fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmClient")
            .field("name", &self.name)
            .field("max_concurrent_requests", &self.limiter.cap)
            .finish()
    }
}

impl LlmClient {
    pub fn new(name: impl Into<String>, backend: Arc<dyn Backend>, max_concurrent_requests: usize) -> Self {
        LlmClient { name: name.into(), backend, limiter: Arc::new(Limiter::new(max_concurrent_requests)) }
    }

    pub fn scripted(name: impl Into<String>, store: ScriptStore) -> Self {
        Self::new(name, Arc::new(ScriptedBackend::new(store)), 16)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn max_concurrent_requests(&self) -> usize {
        self.limiter.cap
    }

    /// Highest number of simultaneous calls observed so far.
    pub fn peak_in_flight(&self) -> usize {
        self.limiter.peak.load(Ordering::SeqCst)
    }

    pub fn complete_attempt(&self, req: &PromptRequest, attempt: u32) -> Result<Completion, GatewayError> {
        if req.user_text.is_empty() {
            return Err(GatewayError::InvalidRequest("user_text must not be empty".into()));
        }
        if attempt == 0 {
            return Err(GatewayError::InvalidRequest("attempt numbers start at 1".into()));
        }
        req.params.validate()?;
        let _permit = self.limiter.acquire();
        let text = self.backend.complete(&self.name, req, attempt)?;
        Ok(Completion { text, backend_name: self.name.clone(), attempt })
    }
}

/// Sends `req` once, as attempt 1.
pub fn complete(client: &LlmClient, req: &PromptRequest) -> Result<Completion, GatewayError> {
    client.complete_attempt(req, 1)
}

/// Re-issues `req` with increasing attempt numbers until `parser` accepts the
/// text or `max_attempts` is used up. Returns the value and the attempt that
/// produced it.
pub fn complete_parsed<T, F>(
    client: &LlmClient,
    req: &PromptRequest,
    parser: F,
    max_attempts: u32,
) -> Result<(T, u32), GatewayError>
where
    F: Fn(&str) -> Result<T, String>,
{
    if max_attempts == 0 {
        return Err(GatewayError::InvalidRequest("max_attempts must be at least 1".into()));
    }
    let mut last = (String::new(), String::new());
    for attempt in 1..=max_attempts {
        let completion = client.complete_attempt(req, attempt)?;
        match parser(&completion.text) {
            Ok(value) => return Ok((value, attempt)),
            Err(err) => {
                tracing::debug!(backend = client.name(), tag = %req.tag, attempt, error = %err, "unparseable completion");
                last = (completion.text, err);
            }
        }
    }
    Err(GatewayError::ParseExhausted {
        backend: client.name().to_string(),
        attempts: max_attempts,
        last_text: last.0,
        last_error: last.1,
    })
}
