//! HTTP client for a hosted generation service.
//!
//! Wire format: `POST {base}/v1/complete` with `{task, prompt, params}`;
//! the reply is `{text}` or `{bytes_b64}`, plus optional `metadata`.

use std::collections::BTreeMap;
use std::time::Duration;

use base64::Engine;
use nodestory::{BackendError, BackendErrorKind, BackendRequest, BackendResponse, Capability, GenerativeBackend, TaskName};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const DEFAULT_KEY_ENV: &str = "NODESTORY_API_KEY";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub url: String,
    /// Environment variable holding the bearer token. The token itself is
    /// never stored.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout", with = "secs")]
    pub timeout: Duration,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff", with = "secs")]
    pub backoff: Duration,
}

fn default_key_env() -> String {
    DEFAULT_KEY_ENV.to_owned()
}
fn default_timeout() -> Duration {
    DEFAULT_TIMEOUT
}
fn default_retries() -> u32 {
    2
}
fn default_backoff() -> Duration {
    Duration::from_millis(500)
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        RemoteConfig {
            url: url.into(),
            api_key_env: default_key_env(),
            timeout: DEFAULT_TIMEOUT,
            retries: default_retries(),
            backoff: default_backoff(),
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    task: TaskName,
    prompt: &'a str,
    params: &'a BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    bytes_b64: Option<String>,
    #[serde(default)]
    metadata: Map<String, Value>,
}

pub struct RemoteBackend {
    agent: ureq::Agent,
    endpoint: String,
    key: Option<String>,
    retries: u32,
    backoff: Duration,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("endpoint", &self.endpoint)
            .field("key", &self.key.as_ref().map(|_| "<redacted>"))
            .field("retries", &self.retries)
            .finish()
    }
}

const CAPABILITIES: [Capability; 4] = [Capability::Text, Capability::Audio, Capability::Image, Capability::Video];

impl RemoteBackend {
    /// Reads the key from the configured environment variable, if set.
    pub fn from_config(config: &RemoteConfig) -> Self {
        let key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_key(config, key)
    }

    pub fn with_key(config: &RemoteConfig, key: Option<String>) -> Self {
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(config.timeout))
                .http_status_as_error(false)
                .build(),
        );
        RemoteBackend {
            agent,
            endpoint: format!("{}/v1/complete", config.url.trim_end_matches('/')),
            key,
            retries: config.retries,
            backoff: config.backoff,
        }
    }

    fn attempt(&self, request: &BackendRequest) -> Result<BackendResponse, (BackendError, bool)> {
        let body = WireRequest {
            task: request.task,
            prompt: &request.prompt,
            params: &request.params,
        };
        let mut call = self.agent.post(&self.endpoint);
        if let Some(key) = &self.key {
            call = call.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = match call.send_json(&body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => {
                return Err((BackendError::new(BackendErrorKind::Timeout, "no answer in time"), true))
            }
            Err(e) => return Err((BackendError::new(BackendErrorKind::Transport, e.to_string()), true)),
        };
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            let retry = status == 429 || status >= 500;
            let message = text.chars().take(500).collect::<String>();
            return Err((BackendError::new(BackendErrorKind::Status(status), message), retry));
        }
        let wire: WireResponse = response.body_mut().read_json().map_err(|e| match e {
            ureq::Error::Timeout(_) => (BackendError::new(BackendErrorKind::Timeout, "body read timed out"), true),
            other => (BackendError::new(BackendErrorKind::InvalidResponse, other.to_string()), false),
        })?;
        let invalid = |m: &str| (BackendError::new(BackendErrorKind::InvalidResponse, m), false);
        let mut out = match (wire.text, wire.bytes_b64) {
            (Some(text), None) => BackendResponse::text(text),
            (None, Some(b64)) => BackendResponse::bytes(
                base64::engine::general_purpose::STANDARD
                    .decode(b64.as_bytes())
                    .map_err(|e| invalid(&format!("bad base64: {e}")))?,
            ),
            _ => return Err(invalid("expected exactly one of text and bytes_b64")),
        };
        out.metadata = wire.metadata;
        Ok(out)
    }
}

impl GenerativeBackend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn capabilities(&self) -> &[Capability] {
        &CAPABILITIES
    }

    /// Retries timeouts, transport failures, 429 and 5xx with doubling waits.
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let mut wait = self.backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(request) {
                Ok(r) => return Ok(r),
                Err((e, retry)) if retry && attempts <= self.retries => {
                    tracing::debug!("remote attempt {attempts} failed: {e}");
                    std::thread::sleep(wait);
                    wait = wait.saturating_mul(2);
                }
                Err((e, _)) => return Err(e.attempts(attempts)),
            }
        }
    }
}
