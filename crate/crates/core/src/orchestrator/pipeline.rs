//! Prompt to graph: generate, reason, diagram.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::drafts::{diagram, parse_drafts, NodeDraft};
use super::{prompts, OrchestratorError, Stage};
use crate::backend::{
    BackendError, BackendRequest, BackendResponse, Capability, GenerativeBackend, Payload, TaskName,
};
use crate::graph::{serialize_graph, StoryGraph};

/// Story size the generator aims for. Outside it the pipeline warns.
pub const NODE_COUNT_RANGE: RangeInclusive<usize> = 8..=12;

/// One backend exchange, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub task: TaskName,
    pub at: DateTime<Utc>,
    pub prompt: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Forwards to another backend and records every exchange.
pub struct RecordingBackend<'a> {
    inner: &'a dyn GenerativeBackend,
    observer: Option<&'a (dyn Fn(&StageRecord) + Sync)>,
    records: Mutex<Vec<StageRecord>>,
}

impl<'a> RecordingBackend<'a> {
    pub fn new(inner: &'a dyn GenerativeBackend) -> Self {
        RecordingBackend {
            inner,
            observer: None,
            records: Mutex::new(Vec::new()),
        }
    }

    pub fn observed(inner: &'a dyn GenerativeBackend, observer: &'a (dyn Fn(&StageRecord) + Sync)) -> Self {
        RecordingBackend {
            inner,
            observer: Some(observer),
            records: Mutex::new(Vec::new()),
        }
    }

    pub fn records(&self) -> Vec<StageRecord> {
        self.records.lock().expect("record lock").clone()
    }

    pub fn into_records(self) -> Vec<StageRecord> {
        self.records.into_inner().expect("record lock")
    }
}

fn stage_of(task: TaskName) -> Stage {
    match task {
        TaskName::Generate => Stage::Generate,
        TaskName::Reason => Stage::Reason,
        TaskName::DiagramCheck => Stage::Diagram,
        TaskName::Edit => Stage::Edit,
        _ => Stage::Route,
    }
}

impl GenerativeBackend for RecordingBackend<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn capabilities(&self) -> &[Capability] {
        self.inner.capabilities()
    }

    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let result = self.inner.complete(request);
        let stage = if request.get("mode") == Some("extend") {
            Stage::Extend
        } else {
            stage_of(request.task)
        };
        let record = StageRecord {
            stage,
            task: request.task,
            at: Utc::now(),
            prompt: request.prompt.clone(),
            params: request.params.clone(),
            response: match &result {
                Ok(BackendResponse {
                    payload: Payload::Text(t),
                    ..
                }) => Some(t.clone()),
                Ok(BackendResponse {
                    payload: Payload::Bytes(b),
                    ..
                }) => Some(format!("<{} bytes>", b.len())),
                Err(_) => None,
            },
            error: result.as_ref().err().map(ToString::to_string),
        };
        if let Some(observer) = self.observer {
            observer(&record);
        }
        self.records.lock().expect("record lock").push(record);
        result
    }
}

/// Narrative text for a premise.
pub fn generate_story(prompt: &str, backend: &dyn GenerativeBackend) -> Result<String, OrchestratorError> {
    if prompt.trim().is_empty() {
        return Err(OrchestratorError::Precondition("prompt is empty"));
    }
    let request = BackendRequest::new(TaskName::Generate, prompts::generate(prompt)).param("prompt", prompt);
    let text = backend.complete(&request)?.into_text()?;
    if text.trim().is_empty() {
        return Err(OrchestratorError::Precondition("generator returned no text"));
    }
    Ok(text)
}

/// Decomposes a narrative into drafts. An unparseable answer is re-requested
/// once with the parse error attached.
pub fn reason_nodes(narrative: &str, backend: &dyn GenerativeBackend) -> Result<Vec<NodeDraft>, OrchestratorError> {
    if narrative.trim().is_empty() {
        return Err(OrchestratorError::Precondition("narrative is empty"));
    }
    let request = BackendRequest::new(TaskName::Reason, prompts::reason(narrative)).param("narrative", narrative);
    let first = backend.complete(&request)?.into_text()?;
    let error = match parse_drafts(&first) {
        Ok(drafts) => return Ok(drafts),
        Err(e) => e,
    };
    let retry = BackendRequest::new(TaskName::Reason, prompts::repair(narrative, &first, &error.to_string()))
        .param("narrative", narrative)
        .param("repair", "true")
        .param("error", error.to_string());
    let second = backend.complete(&retry)?.into_text()?;
    parse_drafts(&second).map_err(|error| OrchestratorError::UnparseableDecomposition { attempts: 2, error })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub graph: StoryGraph,
    pub narrative: String,
    pub drafts: Vec<NodeDraft>,
    pub transcripts: Vec<StageRecord>,
    pub warnings: Vec<String>,
}

pub fn run_pipeline(prompt: &str, backend: &dyn GenerativeBackend) -> Result<PipelineOutput, OrchestratorError> {
    run_pipeline_observed(prompt, backend, &|_| {})
}

/// Like [`run_pipeline`], reporting each backend exchange as it completes.
pub fn run_pipeline_observed(
    prompt: &str,
    backend: &dyn GenerativeBackend,
    observer: &(dyn Fn(&StageRecord) + Sync),
) -> Result<PipelineOutput, OrchestratorError> {
    let recorder = RecordingBackend::observed(backend, observer);
    let narrative = generate_story(prompt, &recorder).map_err(|e| e.at(Stage::Generate))?;
    let drafts = reason_nodes(&narrative, &recorder).map_err(|e| e.at(Stage::Reason))?;
    let graph = diagram(&drafts).map_err(|e| e.at(Stage::Diagram))?;

    let mut warnings = Vec::new();
    let check = BackendRequest::new(TaskName::DiagramCheck, prompts::diagram_check(&serialize_graph(&graph)));
    let verdict = recorder
        .complete(&check)
        .and_then(BackendResponse::into_text)
        .map_err(|e| OrchestratorError::from(e).at(Stage::Diagram))?;
    if !verdict.trim().eq_ignore_ascii_case("ok") {
        warnings.push(format!("diagram check: {}", verdict.trim()));
    }
    let report = graph.validate();
    warnings.extend(report.warnings.iter().map(|w| format!("{w:?}")));
    if !NODE_COUNT_RANGE.contains(&graph.nodes.len()) {
        warnings.push(format!(
            "story has {} nodes, outside the expected {}..={}",
            graph.nodes.len(),
            NODE_COUNT_RANGE.start(),
            NODE_COUNT_RANGE.end()
        ));
    }
    Ok(PipelineOutput {
        graph,
        narrative,
        drafts,
        transcripts: recorder.into_records(),
        warnings,
    })
}
