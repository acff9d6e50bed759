//! Chat-completion HTTP backend.
//!
//! Request (`POST {base_url}/chat/completions`):
//!
//! ```json
//! {"model": "...", "messages": [{"role": "user", "content": "<serialized input>"}],
//!  "temperature": 0.0, "max_tokens": 1024}
//! ```
//!
//! The serialized input is the only message; there is no system prompt.
//! The reply text is `choices[0].message.content`.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::codec::SerializedInput;

use super::{Backend, BackendError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub auth_env_var: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// Delay before the first retry; doubles on each subsequent one.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_timeout_secs() -> f64 {
    60.0
}
fn default_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_max_tokens() -> u32 {
    1024
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            auth_env_var: None,
            timeout_secs: default_timeout_secs(),
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
        }
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    endpoint: String,
    token: Option<String>,
    agent: ureq::Agent,
}

enum Attempt {
    Done(String),
    Retry(BackendError),
    Fatal(BackendError),
}

impl HttpBackend {
    /// Reads the token from the environment up front, so a missing secret
    /// fails before any request is made.
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        let token = match &config.auth_env_var {
            Some(var) => Some(
                std::env::var(var).map_err(|_| BackendError::AuthMissing { var: var.clone() })?,
            ),
            None => None,
        };
        let base = config.base_url.trim_end_matches('/');
        let well_formed = ["http://", "https://"]
            .iter()
            .any(|p| base.len() > p.len() && base.starts_with(p));
        if !well_formed {
            return Err(BackendError::Config {
                message: format!("base_url {:?} is not an http(s) URL", config.base_url),
            });
        }
        if !(config.timeout_secs > 0.0 && config.timeout_secs.is_finite()) {
            return Err(BackendError::Config {
                message: "timeout_secs must be positive".into(),
            });
        }
        let endpoint = format!("{base}/chat/completions");
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            endpoint,
            token,
            agent,
        })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    pub fn request_body(&self, input: &SerializedInput) -> Value {
        json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": input.as_str()}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        })
    }

    fn attempt(&self, input: &SerializedInput) -> Attempt {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = match req.send_json(self.request_body(input)) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(BackendError::Timeout),
            Err(e) => {
                return Attempt::Retry(BackendError::Transport {
                    message: e.to_string(),
                })
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return Attempt::Retry(BackendError::Timeout),
            Err(e) => {
                return Attempt::Retry(BackendError::Transport {
                    message: e.to_string(),
                })
            }
        };
        if !(200..300).contains(&status) {
            let err = BackendError::RemoteError { status, body: text };
            return if status == 408 || status == 429 || status >= 500 {
                Attempt::Retry(err)
            } else {
                Attempt::Fatal(err)
            };
        }
        match extract_content(&text) {
            Ok(s) => Attempt::Done(s),
            Err(e) => Attempt::Fatal(e),
        }
    }
}

/// Pulls `choices[0].message.content` out of a response body.
pub(crate) fn extract_content(body: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(body).map_err(|e| BackendError::BadResponse {
        message: e.to_string(),
    })?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| BackendError::BadResponse {
            message: "missing choices[0].message.content".into(),
        })
}

impl Backend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn model(&self) -> Option<&str> {
        Some(&self.config.model)
    }

    fn deterministic(&self) -> bool {
        self.config.temperature == 0.0
    }

    /// Transient failures (transport, timeout, 408/429/5xx) are retried up to
    /// `retries` times with exponential backoff.
    fn complete(&self, input: &SerializedInput) -> Result<String, BackendError> {
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(input) {
                Attempt::Done(s) => return Ok(s),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) if self.config.retries == 0 => return Err(e),
                Attempt::Retry(e) if attempts > self.config.retries => {
                    return Err(BackendError::BudgetExhausted {
                        attempts,
                        last: e.to_string(),
                    })
                }
                Attempt::Retry(_) => {
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
            }
        }
    }
}
