use nodestory::export::ExportError;
use nodestory::{BackendError, EvalError, GraphError, MediaError, NodeId, OrchestratorError, ParseError, Violation};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("graph is invalid")]
    InvalidGraph(Vec<Violation>),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown project {0:?}")]
    UnknownProject(String),
    #[error("unknown snapshot {0}")]
    UnknownSnapshot(u64),
    #[error("unknown node {0:?}")]
    UnknownNode(NodeId),
    #[error("another change to this project is in progress")]
    Busy,
    #[error("project is at version {current}, request expected {expected}")]
    VersionMismatch { expected: u64, current: u64 },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Orchestrator(OrchestratorError),
    #[error(transparent)]
    Export(ExportError),
    #[error(transparent)]
    Media(MediaError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("project at {path} is unreadable: {message}")]
    CorruptProject { path: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Broad class of a failure, used for HTTP status codes and CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Invalid,
    NotFound,
    Conflict,
    Upstream,
    Internal,
}

impl ServiceError {
    pub fn io(path: impl AsRef<std::path::Path>, e: std::io::Error) -> Self {
        ServiceError::Io {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        use ServiceError::*;
        match self {
            InvalidGraph(_) | Parse(_) | BadRequest(_) | Eval(_) => ErrorClass::Invalid,
            UnknownProject(_) | UnknownSnapshot(_) | UnknownNode(_) => ErrorClass::NotFound,
            Busy | VersionMismatch { .. } => ErrorClass::Conflict,
            Backend(_) => ErrorClass::Upstream,
            Orchestrator(e) => orchestrator_class(e),
            Export(e) => match e {
                ExportError::Graph(g) => graph_class(g),
                ExportError::Io { .. } | ExportError::MissingAsset(_) => ErrorClass::Internal,
                _ => ErrorClass::Invalid,
            },
            Media(e) => match e {
                MediaError::Graph(g) => graph_class(g),
                MediaError::Storage(_) => ErrorClass::Internal,
                _ => ErrorClass::Invalid,
            },
            CorruptProject { .. } | Io { .. } => ErrorClass::Internal,
        }
    }

    /// Short machine-readable tag.
    pub fn code(&self) -> &'static str {
        use ServiceError::*;
        match self {
            InvalidGraph(_) => "invalid_graph",
            Parse(_) => "parse_error",
            BadRequest(_) => "bad_request",
            UnknownProject(_) => "unknown_project",
            UnknownSnapshot(_) => "unknown_snapshot",
            UnknownNode(_) => "unknown_node",
            Busy => "busy",
            VersionMismatch { .. } => "version_mismatch",
            Backend(_) => "backend_error",
            Orchestrator(_) => match self.class() {
                ErrorClass::Upstream => "backend_error",
                ErrorClass::NotFound => "unknown_node",
                _ => "orchestration_error",
            },
            Export(_) => "export_error",
            Media(_) => "media_error",
            Eval(_) => "eval_error",
            CorruptProject { .. } => "corrupt_project",
            Io { .. } => "io_error",
        }
    }

    /// Violations behind the error, when it is about graph integrity.
    pub fn violations(&self) -> Option<&[Violation]> {
        match self {
            ServiceError::InvalidGraph(v) | ServiceError::Parse(ParseError::IntegrityViolation(v)) => Some(v),
            ServiceError::Orchestrator(e) => match e.root() {
                OrchestratorError::Graph(GraphError::Invalid(v)) => Some(v),
                _ => None,
            },
            _ => None,
        }
    }
}

fn graph_class(e: &GraphError) -> ErrorClass {
    match e {
        GraphError::UnknownNode(_) => ErrorClass::NotFound,
        _ => ErrorClass::Invalid,
    }
}

fn orchestrator_class(e: &OrchestratorError) -> ErrorClass {
    match e.root() {
        OrchestratorError::Graph(g) => graph_class(g),
        OrchestratorError::Precondition(_) | OrchestratorError::UnroutableRequest => ErrorClass::Invalid,
        // Everything else is the model misbehaving or unreachable.
        _ => ErrorClass::Upstream,
    }
}

impl From<GraphError> for ServiceError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::UnknownNode(id) => ServiceError::UnknownNode(id),
            GraphError::Invalid(v) => ServiceError::InvalidGraph(v),
            other => ServiceError::BadRequest(other.to_string()),
        }
    }
}

impl From<OrchestratorError> for ServiceError {
    fn from(e: OrchestratorError) -> Self {
        ServiceError::Orchestrator(e)
    }
}

impl From<ExportError> for ServiceError {
    fn from(e: ExportError) -> Self {
        ServiceError::Export(e)
    }
}

impl From<MediaError> for ServiceError {
    fn from(e: MediaError) -> Self {
        ServiceError::Media(e)
    }
}
