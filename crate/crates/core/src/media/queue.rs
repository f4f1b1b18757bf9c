//! Media job queue.
//!
//! Jobs move `queued -> running -> done | failed` and nothing else. Workers
//! pull jobs in enqueue order; every transition is applied and reported
//! under one lock, so observers see a single linear event stream.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{attach_asset, rolling_context, MediaAsset, MediaError, MediaKind, MediaParams, DEFAULT_CONTEXT_BUDGET};
use crate::backend::{BackendRequest, GenerativeBackend, Payload};
use crate::graph::{GraphError, NodeId, StoryGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn can_become(self, next: JobStatus) -> bool {
        matches!(
            (self, next),
            (JobStatus::Queued, JobStatus::Running)
                | (JobStatus::Running, JobStatus::Done)
                | (JobStatus::Running, JobStatus::Failed)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaJob {
    pub job_id: u64,
    pub node_id: NodeId,
    pub params: MediaParams,
    /// The node segment at enqueue time.
    pub text: String,
    /// Rolling context for image and video jobs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub story_context: Option<String>,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub submitted_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset: Option<MediaAsset>,
}

impl MediaJob {
    /// The request sent to the backend for this job.
    pub fn request(&self) -> BackendRequest {
        let kind = self.params.kind;
        let mut prompt = String::new();
        if let Some(ctx) = self.story_context.as_deref().filter(|c| !c.is_empty()) {
            prompt.push_str(&format!("Story background:\n{ctx}\n\n"));
        }
        if let Some(ctx) = self.context.as_deref().filter(|c| !c.is_empty()) {
            prompt.push_str(&format!("Earlier in the story:\n{ctx}\n\n"));
        }
        match kind {
            MediaKind::Audio => prompt.push_str(&self.text),
            _ => prompt.push_str(&format!("Depict this scene:\n{}", self.text)),
        }
        if let Some(style) = &self.params.style_instructions {
            prompt.push_str(&format!("\n\nStyle: {style}"));
        }
        let mut request = BackendRequest::new(kind.task(), prompt)
            .param("text", self.text.as_str())
            .param("provider", self.params.provider.as_str());
        for (key, value) in [
            ("context", &self.context),
            ("story_context", &self.story_context),
            ("voice", &self.params.voice),
            ("style", &self.params.style_instructions),
        ] {
            if let Some(v) = value {
                request = request.param(key, v.as_str());
            }
        }
        request
    }
}

/// One status transition, as streamed to observers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobEvent {
    pub job_id: u64,
    pub node_id: NodeId,
    pub kind: MediaKind,
    pub status: JobStatus,
    pub at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u32>,
}

impl JobEvent {
    fn of(job: &MediaJob, at: DateTime<Utc>) -> Self {
        JobEvent {
            job_id: job.job_id,
            node_id: job.node_id.clone(),
            kind: job.params.kind,
            status: job.status,
            at,
            error: job.error.clone(),
            version: job.asset.as_ref().map(|a| a.version),
        }
    }
}

/// One queued job per selected node, ids counting up from `first_job_id`.
pub fn enqueue_media(
    graph: &StoryGraph,
    selection: &[NodeId],
    params: &MediaParams,
    first_job_id: u64,
) -> Result<Vec<MediaJob>, MediaError> {
    params.check()?;
    if selection.is_empty() {
        return Err(GraphError::EmptySelection.into());
    }
    let now = Utc::now();
    let mut jobs = Vec::with_capacity(selection.len());
    for (offset, id) in selection.iter().enumerate() {
        let node = graph.require(id.as_str())?;
        if node.segment.trim().is_empty() {
            return Err(MediaError::EmptySegment(id.clone()));
        }
        let context = if params.kind.uses_context() {
            Some(rolling_context(graph, id.as_str(), DEFAULT_CONTEXT_BUDGET)?.text)
        } else {
            None
        };
        jobs.push(MediaJob {
            job_id: first_job_id + offset as u64,
            node_id: id.clone(),
            params: params.clone(),
            text: node.segment.clone(),
            context,
            story_context: graph.story_context.clone(),
            status: JobStatus::Queued,
            error: None,
            submitted_at: now,
            started_at: None,
            finished_at: None,
            asset: None,
        });
    }
    Ok(jobs)
}

/// Where finished payloads go. Implementations assign the version and attach
/// the asset to the node; calls for the same (node, kind) must not interleave.
pub trait AssetSink: Sync {
    fn commit(
        &self,
        job: &MediaJob,
        payload: &[u8],
        extension: &str,
        duration_s: Option<f64>,
    ) -> Result<MediaAsset, MediaError>;
}

/// Keeps the graph and payloads in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    graph: Mutex<StoryGraph>,
    files: Mutex<BTreeMap<String, Vec<u8>>>,
}

impl MemorySink {
    pub fn new(graph: StoryGraph) -> Self {
        MemorySink {
            graph: Mutex::new(graph),
            files: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn graph(&self) -> StoryGraph {
        self.graph.lock().expect("sink lock").clone()
    }

    pub fn file(&self, uri: &str) -> Option<Vec<u8>> {
        self.files.lock().expect("sink lock").get(uri).cloned()
    }

    pub fn into_parts(self) -> (StoryGraph, BTreeMap<String, Vec<u8>>) {
        (
            self.graph.into_inner().expect("sink lock"),
            self.files.into_inner().expect("sink lock"),
        )
    }
}

impl AssetSink for MemorySink {
    fn commit(
        &self,
        job: &MediaJob,
        payload: &[u8],
        extension: &str,
        duration_s: Option<f64>,
    ) -> Result<MediaAsset, MediaError> {
        let mut graph = self.graph.lock().expect("sink lock");
        let asset = attach_asset(&mut graph, &job.node_id, job.params.clone(), extension, duration_s)?;
        self.files
            .lock()
            .expect("sink lock")
            .insert(asset.uri.clone(), payload.to_vec());
        Ok(asset)
    }
}

/// Drains the queued jobs with `workers` threads and returns every job in
/// its final state, in input order. Jobs not in `queued` are left alone.
pub fn process_jobs(
    jobs: Vec<MediaJob>,
    backend: &dyn GenerativeBackend,
    sink: &dyn AssetSink,
    workers: usize,
    observer: &(dyn Fn(&JobEvent) + Sync),
) -> Vec<MediaJob> {
    let pending: Vec<usize> = jobs
        .iter()
        .enumerate()
        .filter(|(_, j)| j.status == JobStatus::Queued)
        .map(|(i, _)| i)
        .collect();
    let slots: Vec<Mutex<MediaJob>> = jobs.into_iter().map(Mutex::new).collect();
    let next = AtomicUsize::new(0);
    let stream = Mutex::new(());

    let emit = |job: &mut MediaJob, status: JobStatus, now: DateTime<Utc>| {
        debug_assert!(job.status.can_become(status));
        job.status = status;
        match status {
            JobStatus::Running => job.started_at = Some(now),
            _ => job.finished_at = Some(now),
        }
        observer(&JobEvent::of(job, now));
    };

    let work = || loop {
        let Some(&index) = pending.get(next.fetch_add(1, Ordering::SeqCst)) else {
            break;
        };
        let slot = &slots[index];
        let job = {
            let _linear = stream.lock().expect("event lock");
            let mut job = slot.lock().expect("job lock");
            emit(&mut job, JobStatus::Running, Utc::now());
            job.clone()
        };
        let outcome = generate(&job, backend);
        // Versions are assigned under the stream lock so that done events
        // reach observers in version order.
        let _linear = stream.lock().expect("event lock");
        let mut job = slot.lock().expect("job lock");
        match outcome.and_then(|media| {
            sink.commit(&job, &media.bytes, &media.extension, media.duration_s)
                .map_err(|e| e.to_string())
        }) {
            Ok(asset) => {
                job.asset = Some(asset);
                emit(&mut job, JobStatus::Done, Utc::now());
            }
            Err(message) => {
                job.error = Some(message);
                emit(&mut job, JobStatus::Failed, Utc::now());
            }
        }
    };

    let workers = workers.clamp(1, pending.len().max(1));
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(work);
            }
        });
    }
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("job lock"))
        .collect()
}

struct Generated {
    bytes: Vec<u8>,
    extension: String,
    duration_s: Option<f64>,
}

fn generate(job: &MediaJob, backend: &dyn GenerativeBackend) -> Result<Generated, String> {
    let kind = job.params.kind;
    if !backend.supports(kind.capability()) {
        return Err(format!("backend {} cannot generate {kind}", backend.name()));
    }
    let response = backend.complete(&job.request()).map_err(|e| e.to_string())?;
    let duration_s = response.metadata_f64("duration_s");
    if let Some(d) = duration_s {
        if !(d.is_finite() && d > 0.0) {
            return Err(format!("backend reported a non-positive duration {d}"));
        }
    }
    let extension = response
        .metadata_str("extension")
        .filter(|e| !e.is_empty() && e.chars().all(|c| c.is_ascii_alphanumeric()))
        .unwrap_or(kind.default_extension())
        .to_owned();
    let Payload::Bytes(bytes) = response.payload else {
        return Err("backend returned text where media was expected".to_owned());
    };
    Ok(Generated {
        bytes,
        extension,
        duration_s,
    })
}
