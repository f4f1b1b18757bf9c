//! The generative backend contract.
//!
//! Every generative step, text or media, goes through [`GenerativeBackend::complete`].
//! A request carries a rendered prompt for model-backed implementations and
//! the same inputs as structured `params`, so deterministic implementations
//! never have to parse prose.

mod fault;
mod scripted;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub use fault::FaultyBackend;
pub use scripted::{
    branch_cue, protagonist, split_sentences, word_count, ScriptedBackend, NARRATION_WORDS_PER_SECOND,
    SENTENCES_PER_BEAT,
};

/// Name of the task a request is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Generate,
    Reason,
    DiagramCheck,
    Edit,
    Route,
    Audio,
    Image,
    Video,
}

impl TaskName {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskName::Generate => "generate",
            TaskName::Reason => "reason",
            TaskName::DiagramCheck => "diagram_check",
            TaskName::Edit => "edit",
            TaskName::Route => "route",
            TaskName::Audio => "audio",
            TaskName::Image => "image",
            TaskName::Video => "video",
        }
    }

    pub fn capability(self) -> Capability {
        match self {
            TaskName::Audio => Capability::Audio,
            TaskName::Image => Capability::Image,
            TaskName::Video => Capability::Video,
            _ => Capability::Text,
        }
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Text,
    Audio,
    Image,
    Video,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub task: TaskName,
    pub prompt: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

impl BackendRequest {
    pub fn new(task: TaskName, prompt: impl Into<String>) -> Self {
        BackendRequest {
            task,
            prompt: prompt.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<String>) -> Self {
        self.params.insert(key.to_owned(), value.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Text(String),
    Bytes(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendResponse {
    pub payload: Payload,
    /// Free-form details such as `duration_s`, `extension` or `mime`.
    pub metadata: Map<String, Value>,
}

impl BackendResponse {
    pub fn text(text: impl Into<String>) -> Self {
        BackendResponse {
            payload: Payload::Text(text.into()),
            metadata: Map::new(),
        }
    }

    pub fn bytes(bytes: Vec<u8>) -> Self {
        BackendResponse {
            payload: Payload::Bytes(bytes),
            metadata: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.to_owned(), value.into());
        self
    }

    /// The text payload, or an [`BackendErrorKind::InvalidResponse`] error.
    pub fn into_text(self) -> Result<String, BackendError> {
        match self.payload {
            Payload::Text(t) => Ok(t),
            Payload::Bytes(_) => Err(BackendError::new(
                BackendErrorKind::InvalidResponse,
                "expected text, received bytes",
            )),
        }
    }

    pub fn metadata_f64(&self, key: &str) -> Option<f64> {
        self.metadata.get(key).and_then(Value::as_f64)
    }

    pub fn metadata_str(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).and_then(Value::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendErrorKind {
    Timeout,
    Transport,
    /// The remote answered with a non-success status.
    Status(u16),
    Unsupported,
    InvalidResponse,
    /// The backend ran but declined or failed the task.
    Failed,
}

impl fmt::Display for BackendErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendErrorKind::Timeout => f.write_str("timeout"),
            BackendErrorKind::Transport => f.write_str("transport error"),
            BackendErrorKind::Status(code) => write!(f, "http status {code}"),
            BackendErrorKind::Unsupported => f.write_str("unsupported task"),
            BackendErrorKind::InvalidResponse => f.write_str("invalid response"),
            BackendErrorKind::Failed => f.write_str("failed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("backend {kind} after {attempts} attempt(s): {message}")]
pub struct BackendError {
    pub kind: BackendErrorKind,
    pub message: String,
    pub attempts: u32,
}

impl BackendError {
    pub fn new(kind: BackendErrorKind, message: impl Into<String>) -> Self {
        BackendError {
            kind,
            message: message.into(),
            attempts: 1,
        }
    }

    pub fn attempts(mut self, attempts: u32) -> Self {
        self.attempts = attempts;
        self
    }
}

/// A source of generated text and media.
///
/// Implementations must be callable from several threads at once.
pub trait GenerativeBackend: Send + Sync {
    fn name(&self) -> &str;

    fn capabilities(&self) -> &[Capability];

    fn supports(&self, capability: Capability) -> bool {
        self.capabilities().contains(&capability)
    }

    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError>;
}

impl<T: GenerativeBackend + ?Sized> GenerativeBackend for &T {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn capabilities(&self) -> &[Capability] {
        (**self).capabilities()
    }

    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<T: GenerativeBackend + ?Sized> GenerativeBackend for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn capabilities(&self) -> &[Capability] {
        (**self).capabilities()
    }

    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<T: GenerativeBackend + ?Sized> GenerativeBackend for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn capabilities(&self) -> &[Capability] {
        (**self).capabilities()
    }

    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        (**self).complete(request)
    }
}
