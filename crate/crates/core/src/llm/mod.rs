//! Provider-agnostic chat-completion client.
//!
//! [`LlmClient`] owns the retry policy and the optional response cache and
//! delegates single attempts to a [`ChatBackend`]: either the HTTP backend
//! for chat-completions-compatible endpoints or the scripted mock.

mod cache;
mod http;
mod mock;

use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::ResponseCache;
pub use http::HttpBackend;
pub use mock::{CapturedCall, MockBackend, MockOutcome, MockRule, MockScript};

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_TOP_P: f64 = 1.0;
pub const DEFAULT_API_KEY_ENV: &str = "LITERA_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
}

impl ChatRequest {
    /// A request carrying the default sampling parameters
    /// (temperature 0.7, top_p 1, no penalties).
    pub fn new(model: impl Into<String>, system: impl Into<String>, user: impl Into<String>) -> Self {
        ChatRequest {
            model: model.into(),
            system: system.into(),
            user: user.into(),
            temperature: DEFAULT_TEMPERATURE,
            top_p: DEFAULT_TOP_P,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        let bad = |m: &str| Err(LlmError::InvalidRequest(m.to_string()));
        if self.model.is_empty() {
            return bad("model must not be empty");
        }
        if self.system.is_empty() {
            return bad("system prompt must not be empty");
        }
        if self.user.is_empty() {
            return bad("user content must not be empty");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must be within [0, 2]");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must be within (0, 1]");
        }
        if !self.frequency_penalty.is_finite() || !self.presence_penalty.is_finite() {
            return bad("penalties must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub model: String,
    #[serde(with = "duration_ms")]
    pub latency: Duration,
    pub attempt_count: u32,
    #[serde(default)]
    pub cached: bool,
}

/// Serializes a duration as fractional milliseconds.
pub(crate) mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1000.0)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms.max(0.0) / 1000.0))
    }
}

/// Outcome of a single attempt against a backend.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Rate limits, 5xx responses, timeouts and connection failures.
    #[error("transient: {0}")]
    Transient(String),
    #[error("permanent: {0}")]
    Permanent(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendReply {
    pub content: String,
    pub model: String,
}

#[async_trait]
pub trait ChatBackend: Send + Sync {
    async fn send(&self, request: &ChatRequest) -> Result<BackendReply, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("permanent provider failure after {attempts} attempt(s): {message}")]
    Permanent { attempts: u32, message: String },
}

impl LlmError {
    pub fn attempts(&self) -> u32 {
        match self {
            LlmError::RetriesExhausted { attempts, .. } | LlmError::Permanent { attempts, .. } => {
                *attempts
            }
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub base_url: String,
    /// Name of the environment variable holding the bearer token. Empty
    /// disables authentication, for local endpoints that need none.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
    pub cache_enabled: bool,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            base_url: "https://api.openai.com/v1".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_ms: 120_000,
            max_retries: 3,
            backoff_base_ms: 500,
            cache_enabled: false,
        }
    }
}

impl ProviderConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.timeout_ms == 0 {
            return Err(LlmError::Config("timeout must be positive".into()));
        }
        if self.base_url.trim().is_empty() {
            return Err(LlmError::Config("base_url must not be empty".into()));
        }
        Ok(())
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            backoff_base: Duration::from_millis(self.backoff_base_ms),
            ..RetryPolicy::default()
        }
    }
}

/// Exponential backoff with full jitter.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub factor: f64,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            factor: 2.0,
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Upper bound of the sleep before retry number `retry` (1-based).
    pub fn backoff_cap(&self, retry: u32) -> Duration {
        let exp = self.factor.powi(retry.saturating_sub(1) as i32);
        let secs = self.backoff_base.as_secs_f64() * exp;
        Duration::from_secs_f64(secs.min(self.max_backoff.as_secs_f64()))
    }

    pub fn backoff(&self, retry: u32) -> Duration {
        let cap = self.backoff_cap(retry);
        if cap.is_zero() {
            return cap;
        }
        rand::thread_rng().gen_range(Duration::ZERO..=cap)
    }
}

/// Stable SHA-256 over every field that affects the completion.
pub fn cache_key(request: &ChatRequest) -> String {
    let mut h = Sha256::new();
    for part in [&request.model, &request.system, &request.user] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    for v in [
        request.temperature,
        request.top_p,
        request.frequency_penalty,
        request.presence_penalty,
    ] {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn normalize_content(mut content: String) -> String {
    while content.ends_with('\n') {
        content.pop();
        if content.ends_with('\r') {
            content.pop();
        }
    }
    content
}

#[derive(Clone)]
pub struct LlmClient {
    backend: Arc<dyn ChatBackend>,
    retry: RetryPolicy,
    cache: Option<Arc<ResponseCache>>,
}

impl std::fmt::Debug for LlmClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmClient")
            .field("retry", &self.retry)
            .field("cache", &self.cache.is_some())
            .finish()
    }
}

impl LlmClient {
    pub fn new(backend: Arc<dyn ChatBackend>, retry: RetryPolicy) -> Self {
        LlmClient {
            backend,
            retry,
            cache: None,
        }
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    /// HTTP client for `config`. Fails before any network traffic when the
    /// API key variable is unset.
    pub fn http(config: &ProviderConfig) -> Result<Self, LlmError> {
        let backend = HttpBackend::from_config(config)?;
        let mut client = LlmClient::new(Arc::new(backend), config.retry_policy());
        if config.cache_enabled {
            client = client.with_cache(Arc::new(ResponseCache::in_memory()));
        }
        Ok(client)
    }

    pub fn retry_policy(&self) -> &RetryPolicy {
        &self.retry
    }

    pub async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let started = Instant::now();
        let key = self.cache.as_ref().map(|_| cache_key(request));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(hit) = cache.get(key) {
                return Ok(ChatResponse {
                    content: hit.content,
                    model: hit.model,
                    latency: started.elapsed(),
                    attempt_count: 1,
                    cached: true,
                });
            }
        }

        let mut attempts = 0u32;
        loop {
            attempts += 1;
            match self.backend.send(request).await {
                Ok(reply) => {
                    let reply = BackendReply {
                        content: normalize_content(reply.content),
                        model: reply.model,
                    };
                    if let (Some(cache), Some(key)) = (&self.cache, key) {
                        cache.put(key, reply.clone());
                    }
                    return Ok(ChatResponse {
                        content: reply.content,
                        model: reply.model,
                        latency: started.elapsed(),
                        attempt_count: attempts,
                        cached: false,
                    });
                }
                Err(BackendError::Permanent(message)) => {
                    return Err(LlmError::Permanent { attempts, message });
                }
                Err(BackendError::Transient(message)) => {
                    if attempts > self.retry.max_retries {
                        return Err(LlmError::RetriesExhausted {
                            attempts,
                            last: message,
                        });
                    }
                    tracing::debug!(attempt = attempts, %message, "transient failure, backing off");
                    tokio::time::sleep(self.retry.backoff(attempts)).await;
                }
            }
        }
    }

    /// Runs `requests` with at most `max_in_flight` outstanding. Results come
    /// back in request order; a failure at one index does not affect others.
    pub async fn complete_many(
        &self,
        requests: &[ChatRequest],
        max_in_flight: usize,
    ) -> Result<Vec<Result<ChatResponse, LlmError>>, LlmError> {
        if max_in_flight == 0 {
            return Err(LlmError::InvalidRequest("max_in_flight must be at least 1".into()));
        }
        Ok(stream::iter(requests.iter().map(|r| self.complete(r)))
            .buffered(max_in_flight)
            .collect()
            .await)
    }
}

/// Indices and errors of the failed entries of a [`LlmClient::complete_many`] result.
pub fn failures(results: &[Result<ChatResponse, LlmError>]) -> Vec<(usize, &LlmError)> {
    results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().err().map(|e| (i, e)))
        .collect()
}
