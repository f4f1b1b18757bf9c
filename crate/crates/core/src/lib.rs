//! Story graphs of multimodal nodes: the graph model and its exchange
//! format, task routing and text generation over a pluggable backend,
//! per-node media generation, export compilation and the structure
//! generation experiment.
//!
//! The commonly used types are re-exported at the crate root.

pub mod backend;
pub mod evaluation;
pub mod export;
pub mod graph;
pub mod media;
pub mod orchestrator;

pub use backend::{
    BackendError, BackendErrorKind, BackendRequest, BackendResponse, Capability, GenerativeBackend, Payload,
    ScriptedBackend, TaskName,
};
pub use evaluation::{EvalError, EvalOptions, EvalSummary, TrialRecord};
pub use export::{ExportError, ExportManifest, ExportSelection, ManifestEntry};
pub use graph::{
    parse_graph, parse_graph_with, serialize_graph, GraphError, NewNode, NodeId, ParseError, ParseMode, Position,
    StoryEdge, StoryGraph, StoryNode, TextUpdate, TopologyClass, ValidationReport, Violation, Warning,
};
pub use media::{JobEvent, JobStatus, MediaAsset, MediaError, MediaJob, MediaKind, MediaParams};
pub use orchestrator::{OrchestratorError, Routing, Stage, TaskKind, TaskRequest};
