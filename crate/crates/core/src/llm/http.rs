//! Backend for chat-completions-compatible HTTP endpoints.

use async_trait::async_trait;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{BackendError, BackendReply, ChatBackend, ChatRequest, LlmError, ProviderConfig};

pub struct HttpBackend {
    http: reqwest::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.endpoint)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: [WireMessage<'a>; 2],
    temperature: f64,
    top_p: f64,
    frequency_penalty: f64,
    presence_penalty: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    model: Option<String>,
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReplyMessage,
}

#[derive(Deserialize)]
struct WireReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

impl HttpBackend {
    pub fn from_config(config: &ProviderConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let api_key = if config.api_key_env.is_empty() {
            None
        } else {
            match std::env::var(&config.api_key_env) {
                Ok(k) if !k.trim().is_empty() => Some(k),
                _ => {
                    return Err(LlmError::Config(format!(
                        "environment variable {} is not set",
                        config.api_key_env
                    )))
                }
            }
        };
        let http = reqwest::Client::builder()
            .timeout(config.timeout())
            .build()
            .map_err(|e| LlmError::Config(format!("building HTTP client: {e}")))?;
        Ok(HttpBackend {
            http,
            endpoint: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            api_key,
        })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

pub(crate) fn classify_status(status: StatusCode) -> Option<bool> {
    if status.is_success() {
        None
    } else {
        Some(
            status == StatusCode::TOO_MANY_REQUESTS
                || status == StatusCode::REQUEST_TIMEOUT
                || status.is_server_error(),
        )
    }
}

#[async_trait]
impl ChatBackend for HttpBackend {
    async fn send(&self, request: &ChatRequest) -> Result<BackendReply, BackendError> {
        let body = WireRequest {
            model: &request.model,
            messages: [
                WireMessage {
                    role: "system",
                    content: &request.system,
                },
                WireMessage {
                    role: "user",
                    content: &request.user,
                },
            ],
            temperature: request.temperature,
            top_p: request.top_p,
            frequency_penalty: request.frequency_penalty,
            presence_penalty: request.presence_penalty,
        };
        let mut req = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| {
            // connection refused, DNS failures and timeouts are all worth retrying
            BackendError::Transient(format!("request to {} failed: {e}", self.endpoint))
        })?;

        let status = resp.status();
        if let Some(transient) = classify_status(status) {
            let text = resp.text().await.unwrap_or_default();
            let snippet: String = text.chars().take(300).collect();
            let msg = format!("HTTP {status}: {snippet}");
            return Err(if transient {
                BackendError::Transient(msg)
            } else {
                BackendError::Permanent(msg)
            });
        }

        let bytes = resp
            .bytes()
            .await
            .map_err(|e| BackendError::Transient(format!("reading response body: {e}")))?;
        let parsed: WireResponse = serde_json::from_slice(&bytes)
            .map_err(|e| BackendError::Permanent(format!("malformed response body: {e}")))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Permanent("response has no choices[0].message.content".into()))?;
        Ok(BackendReply {
            content,
            model: parsed.model.unwrap_or_else(|| request.model.clone()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_classes() {
        assert_eq!(classify_status(StatusCode::OK), None);
        assert_eq!(classify_status(StatusCode::TOO_MANY_REQUESTS), Some(true));
        assert_eq!(classify_status(StatusCode::BAD_GATEWAY), Some(true));
        assert_eq!(classify_status(StatusCode::UNAUTHORIZED), Some(false));
        assert_eq!(classify_status(StatusCode::BAD_REQUEST), Some(false));
    }

    #[test]
    fn missing_key_is_config_error() {
        let cfg = ProviderConfig {
            api_key_env: "LITERA_TEST_SURELY_UNSET_KEY".into(),
            ..ProviderConfig::default()
        };
        assert!(matches!(HttpBackend::from_config(&cfg), Err(LlmError::Config(_))));
        let open = ProviderConfig {
            api_key_env: String::new(),
            base_url: "http://localhost:1/v1/".into(),
            ..ProviderConfig::default()
        };
        let b = HttpBackend::from_config(&open).unwrap();
        assert_eq!(b.endpoint(), "http://localhost:1/v1/chat/completions");
    }
}
