//! Chat-completion client over HTTP.
//!
//! Sends `{model, messages, temperature, top_p?}` as JSON and reads
//! `choices[0].message.content`. Rate limits (429) and server errors (5xx)
//! are retried with capped exponential backoff; `Retry-After` in seconds is
//! honored up to the cap. The API key is only ever read from the environment.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatMessage};
use crate::error::{Error, Result};

pub const DEFAULT_API_KEY_ENV: &str = "VALUEBANDIT_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelStyle {
    /// temperature 1.0, no top-p
    Gpt4,
    /// temperature 0.6, top-p 0.9
    Llama2,
}

impl ModelStyle {
    pub fn temperature(self) -> f64 {
        match self {
            ModelStyle::Gpt4 => 1.0,
            ModelStyle::Llama2 => 0.6,
        }
    }

    pub fn top_p(self) -> Option<f64> {
        match self {
            ModelStyle::Gpt4 => None,
            ModelStyle::Llama2 => Some(0.9),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 5,
            base_delay_ms: 500,
            max_delay_ms: 16_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based), ignoring server hints.
    pub fn delay(&self, retry: u32) -> Duration {
        let exp = self.base_delay_ms.saturating_mul(1u64 << retry.min(30));
        Duration::from_millis(exp.min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteSettings {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_style")]
    pub style: ModelStyle,
    /// Overrides the style's temperature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    /// Overrides the style's top-p.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_style() -> ModelStyle {
    ModelStyle::Gpt4
}

fn default_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

fn default_timeout() -> u64 {
    120
}

impl RemoteSettings {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, style: ModelStyle) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            style,
            temperature: None,
            top_p: None,
            api_key_env: default_key_env(),
            timeout_secs: default_timeout(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn temperature(&self) -> f64 {
        self.temperature.unwrap_or(self.style.temperature())
    }

    pub fn top_p(&self) -> Option<f64> {
        self.top_p.or(self.style.top_p())
    }

    pub fn request(&self, messages: &[ChatMessage]) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages: messages.to_vec(),
            temperature: self.temperature(),
            top_p: self.top_p(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub choices: Vec<Choice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub message: ResponseMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMessage {
    #[serde(default)]
    pub role: Option<String>,
    pub content: String,
}

impl ChatResponse {
    pub fn from_content(content: impl Into<String>) -> Self {
        Self {
            choices: vec![Choice {
                message: ResponseMessage {
                    role: Some("assistant".into()),
                    content: content.into(),
                },
            }],
        }
    }

    pub fn first_content(&self) -> Result<&str> {
        self.choices
            .first()
            .map(|c| c.message.content.as_str())
            .ok_or_else(|| Error::Protocol("response has no choices".into()))
    }
}

#[derive(Clone)]
pub struct RemoteChat {
    settings: RemoteSettings,
    api_key: Option<String>,
    client: Client,
    tag: String,
}

impl std::fmt::Debug for RemoteChat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // never print the key
        f.debug_struct("RemoteChat")
            .field("settings", &self.settings)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl RemoteChat {
    /// Builds a client, reading the API key from `settings.api_key_env` if set.
    pub fn new(settings: RemoteSettings) -> Result<Self> {
        let api_key = std::env::var(&settings.api_key_env).ok().filter(|k| !k.is_empty());
        let client = Client::builder()
            .timeout(Duration::from_secs(settings.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let tag = format!("remote:{}", settings.model);
        Ok(Self {
            settings,
            api_key,
            client,
            tag,
        })
    }

    pub fn settings(&self) -> &RemoteSettings {
        &self.settings
    }

    pub fn send(&self, request: &ChatRequest) -> Result<ChatResponse> {
        let policy = &self.settings.retry;
        let mut retry = 0;
        loop {
            match self.attempt(request) {
                Ok(resp) => return Ok(resp),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry { message, hint }) => {
                    if retry >= policy.max_retries {
                        return Err(Error::Transport {
                            message: format!("{message} (gave up after {} retries)", retry),
                            retryable: true,
                        });
                    }
                    let delay = hint
                        .map(|h| h.min(Duration::from_millis(policy.max_delay_ms)))
                        .unwrap_or_else(|| policy.delay(retry));
                    log::warn!("{message}; retry {} in {:?}", retry + 1, delay);
                    std::thread::sleep(delay);
                    retry += 1;
                }
            }
        }
    }

    fn attempt(&self, request: &ChatRequest) -> Result<ChatResponse, Attempt> {
        let mut builder = self.client.post(&self.settings.endpoint).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| Attempt::Retry {
            message: format!("request failed: {e}"),
            hint: None,
        })?;
        let status = resp.status();
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            let hint = resp
                .headers()
                .get(reqwest::header::RETRY_AFTER)
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(Attempt::Retry {
                message: format!("server returned {status}"),
                hint,
            });
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(Error::Transport {
                message: format!("server returned {status}"),
                retryable: false,
            }));
        }
        let body = resp.text().map_err(|e| Attempt::Retry {
            message: format!("reading body: {e}"),
            hint: None,
        })?;
        serde_json::from_str(&body)
            .map_err(|e| Attempt::Fatal(Error::Protocol(format!("malformed response body: {e}"))))
    }
}

enum Attempt {
    Retry { message: String, hint: Option<Duration> },
    Fatal(Error),
}

impl ChatBackend for RemoteChat {
    fn tag(&self) -> &str {
        &self.tag
    }

    fn complete(&mut self, messages: &[ChatMessage]) -> Result<String> {
        let request = self.settings.request(messages);
        let response = self.send(&request)?;
        Ok(response.first_content()?.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn style_defaults() {
        let g = RemoteSettings::new("http://x", "gpt-4", ModelStyle::Gpt4);
        assert_eq!((g.temperature(), g.top_p()), (1.0, None));
        let l = RemoteSettings::new("http://x", "llama", ModelStyle::Llama2);
        assert_eq!((l.temperature(), l.top_p()), (0.6, Some(0.9)));
        let mut o = g.clone();
        o.temperature = Some(0.1);
        assert_eq!(o.temperature(), 0.1);
    }

    #[test]
    fn request_wire_format() {
        let s = RemoteSettings::new("http://x", "gpt-4", ModelStyle::Gpt4);
        let body = serde_json::to_value(s.request(&[ChatMessage::system("hi"), ChatMessage::user("85?")])).unwrap();
        assert_eq!(
            body,
            serde_json::json!({
                "model": "gpt-4",
                "messages": [{"role": "system", "content": "hi"}, {"role": "user", "content": "85?"}],
                "temperature": 1.0
            })
        );
        let l = RemoteSettings::new("http://x", "llama", ModelStyle::Llama2);
        let body = serde_json::to_value(l.request(&[])).unwrap();
        assert_eq!(body["top_p"], 0.9);
        assert_eq!(body["temperature"], 0.6);
    }

    #[test]
    fn response_parsing() {
        let r: ChatResponse = serde_json::from_str(
            r#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"72"}}]}"#,
        )
        .unwrap();
        assert_eq!(r.first_content().unwrap(), "72");
        let empty: ChatResponse = serde_json::from_str(r#"{"choices":[]}"#).unwrap();
        assert!(matches!(empty.first_content(), Err(Error::Protocol(_))));
    }

    #[test]
    fn backoff_is_capped() {
        let p = RetryPolicy {
            max_retries: 10,
            base_delay_ms: 100,
            max_delay_ms: 1000,
        };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(400));
        assert_eq!(p.delay(8), Duration::from_millis(1000));
        assert_eq!(p.delay(40), Duration::from_millis(1000));
    }

    #[test]
    fn unreachable_endpoint_is_retryable_transport_error() {
        let mut s = RemoteSettings::new("http://127.0.0.1:9/v1/chat/completions", "m", ModelStyle::Gpt4);
        s.retry = RetryPolicy {
            max_retries: 1,
            base_delay_ms: 1,
            max_delay_ms: 1,
        };
        s.timeout_secs = 2;
        let mut c = RemoteChat::new(s).unwrap();
        let err = c.complete(&[ChatMessage::user("hi")]).unwrap_err();
        assert!(err.is_retryable(), "{err}");
    }
}
