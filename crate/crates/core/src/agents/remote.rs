//! Chat-completions client with an image part, retries and an in-flight cap.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::BackendError;
use crate::render::Frame;

pub const DEFAULT_API_KEY_ENV: &str = "MIRRORBENCH_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteEndpointConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model_id: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    /// First retry delay; doubles per attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_temperature() -> f64 {
    0.2
}
fn default_max_retries() -> u32 {
    3
}
fn default_timeout() -> f64 {
    60.0
}
fn default_max_in_flight() -> usize {
    4
}
fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}
fn default_backoff_ms() -> u64 {
    500
}

impl RemoteEndpointConfig {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        RemoteEndpointConfig {
            base_url: base_url.into(),
            model_id: model_id.into(),
            temperature: default_temperature(),
            max_retries: default_max_retries(),
            timeout_secs: default_timeout(),
            max_in_flight: default_max_in_flight(),
            api_key_env: default_api_key_env(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn new(n: usize) -> Self {
        Permits { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().expect("permit lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("permit lock");
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("permit lock") += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteClient {
    cfg: RemoteEndpointConfig,
    token: String,
    http: reqwest::blocking::Client,
    permits: Permits,
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

impl RemoteClient {
    /// Reads the bearer token from `cfg.api_key_env`; a missing token is a
    /// configuration error.
    pub fn from_env(cfg: RemoteEndpointConfig) -> Result<Self, BackendError> {
        let token = std::env::var(&cfg.api_key_env).map_err(|_| {
            BackendError::Config(format!("environment variable {} is not set", cfg.api_key_env))
        })?;
        Self::with_token(cfg, token)
    }

    pub fn with_token(cfg: RemoteEndpointConfig, token: impl Into<String>) -> Result<Self, BackendError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(RemoteClient {
            permits: Permits::new(cfg.max_in_flight),
            cfg,
            token: token.into(),
            http,
        })
    }

    pub fn config(&self) -> &RemoteEndpointConfig {
        &self.cfg
    }

    /// Request body for one step.
    pub fn request_body(&self, system_text: &str, user_text: &str, frame: &Frame) -> Value {
        let png = base64::engine::general_purpose::STANDARD.encode(frame.to_png());
        json!({
            "model": self.cfg.model_id,
            "temperature": self.cfg.temperature,
            "messages": [
                {"role": "system", "content": system_text},
                {"role": "user", "content": [
                    {"type": "text", "text": user_text},
                    {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{png}")}}
                ]}
            ]
        })
    }

    fn attempt(&self, body: &Value) -> Result<String, Failure> {
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let _permit = self.permits.acquire();
        let resp = self
            .http
            .post(url)
            .bearer_auth(&self.token)
            .json(body)
            .send()
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Failure::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(format!("HTTP {status}")));
        }
        let v: Value = resp.json().map_err(|e| Failure::Retryable(e.to_string()))?;
        extract_content(&v).ok_or_else(|| Failure::Retryable("response has no message content".into()))
    }

    /// Sends one request with up to `max_retries` retries and exponential
    /// backoff; returns the raw model text.
    pub fn step(&self, system_text: &str, user_text: &str, frame: &Frame) -> Result<String, BackendError> {
        let body = self.request_body(system_text, user_text, frame);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(e)) => {
                    return Err(BackendError::Unavailable { attempts, last_error: e });
                }
                Err(Failure::Retryable(e)) => {
                    if attempts > self.cfg.max_retries {
                        return Err(BackendError::Unavailable { attempts, last_error: e });
                    }
                    tracing::warn!(attempts, error = %e, "remote step failed, retrying");
                    let delay = self.cfg.backoff_ms.saturating_mul(1 << (attempts - 1).min(16));
                    std::thread::sleep(Duration::from_millis(delay.min(30_000)));
                }
            }
        }
    }
}

/// `choices[0].message.content`, as a string or concatenated text parts.
fn extract_content(v: &Value) -> Option<String> {
    let content = v.get("choices")?.get(0)?.get("message")?.get("content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join(""),
        ),
        _ => None,
    }
}

/// One-shot form of [`RemoteClient::step`].
pub fn remote_step(
    cfg: &RemoteEndpointConfig,
    system_text: &str,
    user_text: &str,
    frame: &Frame,
) -> Result<String, BackendError> {
    RemoteClient::from_env(cfg.clone())?.step(system_text, user_text, frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_extraction() {
        let v = json!({"choices": [{"message": {"content": "{\"a\":1}"}}]});
        assert_eq!(extract_content(&v).as_deref(), Some("{\"a\":1}"));
        let v = json!({"choices": [{"message": {"content": [{"type":"text","text":"x"},{"type":"text","text":"y"}]}}]});
        assert_eq!(extract_content(&v).as_deref(), Some("xy"));
        assert!(extract_content(&json!({})).is_none());
    }

    #[test]
    fn missing_token_is_config_error() {
        let mut cfg = RemoteEndpointConfig::new("http://127.0.0.1:9", "m");
        cfg.api_key_env = "MIRRORBENCH_TEST_SURELY_UNSET_VAR".into();
        assert!(matches!(RemoteClient::from_env(cfg), Err(BackendError::Config(_))));
    }

    #[test]
    fn defaults() {
        let cfg: RemoteEndpointConfig =
            serde_json::from_str(r#"{"base_url":"http://x","model_id":"m"}"#).unwrap();
        assert_eq!(cfg.temperature, 0.2);
        assert_eq!(cfg.max_retries, 3);
    }
}
