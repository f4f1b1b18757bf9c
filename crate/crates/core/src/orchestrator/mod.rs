//! Task selection and the text-generation tasks: generator, reasoner,
//! diagrammer and editor.

mod drafts;
mod editor;
mod pipeline;
pub mod prompts;
mod router;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::graph::GraphError;

pub use drafts::{diagram, drafts_from_graph, parse_drafts, render_drafts, DraftParseError, NodeDraft};
pub use editor::{edit_nodes, extend_story, parse_edit_response};
pub use pipeline::{
    generate_story, reason_nodes, run_pipeline, run_pipeline_observed, PipelineOutput,
    RecordingBackend, StageRecord, NODE_COUNT_RANGE,
};
pub use router::{route, route_from_params, route_params, route_with_backend, Routing, Scope, TaskKind, TaskRequest};

/// Step of a pipeline, used to tag errors and transcripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Route,
    Generate,
    Reason,
    Diagram,
    Edit,
    Extend,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Route => "route",
            Stage::Generate => "generate",
            Stage::Reason => "reason",
            Stage::Diagram => "diagram",
            Stage::Edit => "edit",
            Stage::Extend => "extend",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrchestratorError {
    #[error("{0}")]
    Precondition(&'static str),
    #[error("request has neither an utterance nor a command")]
    UnroutableRequest,
    #[error("backend chose an unknown task {0:?}")]
    InvalidRoute(String),
    #[error(transparent)]
    BackendFailure(#[from] BackendError),
    #[error("decomposition unparseable after {attempts} attempts: {error}")]
    UnparseableDecomposition { attempts: u32, error: DraftParseError },
    #[error("draft {ordinal} lists missing successor {successor}")]
    DanglingSuccessor { ordinal: u32, successor: u32 },
    #[error("drafts form a cycle {0:?}")]
    CyclicDrafts(Vec<u32>),
    #[error("editor returned an unusable answer for node {node}: {message}")]
    InvalidEdit { node: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        source: Box<OrchestratorError>,
    },
}

impl OrchestratorError {
    pub(crate) fn at(self, stage: Stage) -> Self {
        match self {
            tagged @ OrchestratorError::Stage { .. } => tagged,
            other => OrchestratorError::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Stage tag, if the error came out of a pipeline.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            OrchestratorError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// The error with any stage tag removed.
    pub fn root(&self) -> &OrchestratorError {
        match self {
            OrchestratorError::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
