//! A live project: on-disk state plus the locks and event stream around it.
//!
//! External changes take the gate with `try_lock` and fail fast with
//! [`ServiceError::Busy`]; they also carry the version they were based on
//! and fail with [`ServiceError::VersionMismatch`] if anything committed in
//! between. Media workers commit through the state lock alone.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use nodestory::export::{
    build_manifest, export_bundle, export_storyboard, export_warnings, render_srt, sequence_for_export, BundleInventory,
};
use nodestory::media::{enqueue_media, process_jobs, AssetSink};
use nodestory::orchestrator::{
    edit_nodes, extend_story, route, run_pipeline_observed, RecordingBackend, Scope, StageRecord,
};
use nodestory::{
    parse_graph_with, ExportManifest, ExportSelection, GenerativeBackend, JobEvent, MediaAsset, MediaError, MediaJob,
    MediaKind, MediaParams, NewNode, NodeId, ParseMode, Position, Routing, Stage, StoryGraph, TaskKind, TaskName,
    TaskRequest, TextUpdate, TopologyClass,
};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::error::ServiceError;
use crate::store::{FaultHook, Manifest, ProjectDir, SnapshotInfo};

const EVENT_BUFFER: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEvent {
    pub stage: Stage,
    pub task: TaskName,
    pub at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum ProjectEvent {
    Job(JobEvent),
    Stage(StageEvent),
}

impl ProjectEvent {
    pub fn name(&self) -> &'static str {
        match self {
            ProjectEvent::Job(_) => "job",
            ProjectEvent::Stage(_) => "stage",
        }
    }
}

/// An event with its position in the project's stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequenced {
    pub seq: u64,
    pub event: ProjectEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectInfo {
    pub project_id: String,
    pub name: String,
    pub version: u64,
    pub head: u64,
    pub nodes: usize,
    pub edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyClass>,
    pub created_at: DateTime<Utc>,
}

/// Outcome of a graph change.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Committed {
    pub version: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub utterance: String,
    #[serde(default)]
    pub selection: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<TaskKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatReply {
    pub task_kind: TaskKind,
    pub routing: Routing,
    pub version: u64,
    /// Nodes created or rewritten.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeId>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub jobs: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub export: Option<BundleInventory>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportOutcome {
    pub inventory: BundleInventory,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneOutcome {
    pub snapshots: usize,
    pub removed: Vec<String>,
}

struct State {
    manifest: Manifest,
    graph: StoryGraph,
}

pub struct Project {
    dir: ProjectDir,
    backend: Arc<dyn GenerativeBackend>,
    workers: usize,
    state: Mutex<State>,
    gate: Mutex<()>,
    events: broadcast::Sender<Sequenced>,
    seq: AtomicU64,
}

impl std::fmt::Debug for Project {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Project").field("dir", &self.dir).finish_non_exhaustive()
    }
}

impl Project {
    fn from_loaded(dir: ProjectDir, loaded: crate::store::Loaded, backend: Arc<dyn GenerativeBackend>, workers: usize) -> Self {
        Project {
            dir,
            backend,
            workers: workers.max(1),
            state: Mutex::new(State {
                manifest: loaded.manifest,
                graph: loaded.graph,
            }),
            gate: Mutex::new(()),
            events: broadcast::channel(EVENT_BUFFER).0,
            seq: AtomicU64::new(0),
        }
    }

    pub fn create(
        root: &Path,
        project_id: &str,
        name: &str,
        graph: &StoryGraph,
        backend: Arc<dyn GenerativeBackend>,
        workers: usize,
        hook: Option<FaultHook>,
    ) -> Result<Self, ServiceError> {
        let dir = ProjectDir::new(root).with_fault_hook(hook);
        let loaded = dir.create(project_id, name, graph)?;
        Ok(Self::from_loaded(dir, loaded, backend, workers))
    }

    pub fn open(
        root: &Path,
        backend: Arc<dyn GenerativeBackend>,
        workers: usize,
        hook: Option<FaultHook>,
    ) -> Result<Self, ServiceError> {
        let dir = ProjectDir::new(root).with_fault_hook(hook);
        let loaded = dir.open()?;
        Ok(Self::from_loaded(dir, loaded, backend, workers))
    }

    pub fn root(&self) -> &Path {
        self.dir.root()
    }

    fn state(&self) -> MutexGuard<'_, State> {
        self.state.lock().expect("project state lock")
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Sequenced> {
        self.events.subscribe()
    }

    fn publish(&self, event: ProjectEvent) {
        let seq = self.seq.fetch_add(1, Ordering::SeqCst) + 1;
        // No subscribers is fine.
        let _ = self.events.send(Sequenced { seq, event });
    }

    pub fn info(&self) -> ProjectInfo {
        let s = self.state();
        ProjectInfo {
            project_id: s.manifest.project_id.clone(),
            name: s.manifest.name.clone(),
            version: s.manifest.version,
            head: s.manifest.head,
            nodes: s.graph.nodes.len(),
            edges: s.graph.edges.len(),
            topology: s.graph.classify_topology().ok(),
            created_at: s.manifest.created_at,
        }
    }

    pub fn graph(&self) -> (StoryGraph, u64) {
        let s = self.state();
        (s.graph.clone(), s.manifest.version)
    }

    pub fn manifest(&self) -> Manifest {
        self.state().manifest.clone()
    }

    pub fn jobs(&self) -> Vec<MediaJob> {
        self.state().manifest.jobs.clone()
    }

    pub fn snapshots(&self) -> Vec<SnapshotInfo> {
        self.state().manifest.snapshots.clone()
    }

    pub fn transcripts(&self) -> Vec<StageRecord> {
        self.state().manifest.transcripts.clone()
    }

    /// Takes the gate and checks the caller's version. Returns the graph
    /// and version the change is based on.
    fn begin(&self, if_match: Option<u64>) -> Result<(MutexGuard<'_, ()>, StoryGraph, u64), ServiceError> {
        let gate = self.gate.try_lock().map_err(|_| ServiceError::Busy)?;
        let s = self.state();
        if let Some(expected) = if_match {
            if expected != s.manifest.version {
                return Err(ServiceError::VersionMismatch {
                    expected,
                    current: s.manifest.version,
                });
            }
        }
        Ok((gate, s.graph.clone(), s.manifest.version))
    }

    fn commit(
        &self,
        base: u64,
        graph: StoryGraph,
        reason: &str,
        update: impl FnOnce(&mut Manifest),
    ) -> Result<u64, ServiceError> {
        let mut s = self.state();
        if s.manifest.version != base {
            return Err(ServiceError::VersionMismatch {
                expected: base,
                current: s.manifest.version,
            });
        }
        let next = self.dir.commit(&s.manifest, &graph, reason, update)?;
        let version = next.version;
        s.manifest = next;
        s.graph = graph;
        Ok(version)
    }

    /// Replaces the graph with a client document.
    pub fn replace_graph(&self, document: &str, mode: ParseMode, if_match: Option<u64>) -> Result<Committed, ServiceError> {
        let graph = parse_graph_with(document, mode)?;
        let (_gate, _, base) = self.begin(if_match)?;
        let warnings = graph.validate().warnings.iter().map(|w| format!("{w:?}")).collect();
        let version = self.commit(base, graph, "replace", |_| {})?;
        Ok(Committed {
            version,
            warnings,
            nodes: Vec::new(),
        })
    }

    pub fn add_node(&self, new: NewNode, if_match: Option<u64>) -> Result<Committed, ServiceError> {
        let (_gate, graph, base) = self.begin(if_match)?;
        let (graph, id) = graph.add_node(new)?;
        let version = self.commit(base, graph, "add node", |_| {})?;
        Ok(Committed {
            version,
            warnings: Vec::new(),
            nodes: vec![id],
        })
    }

    pub fn update_node(
        &self,
        id: &NodeId,
        update: TextUpdate,
        position: Option<Position>,
        if_match: Option<u64>,
    ) -> Result<Committed, ServiceError> {
        let (_gate, mut graph, base) = self.begin(if_match)?;
        graph.require(id.as_str())?;
        if update.label.is_some() || update.segment.is_some() {
            graph = graph.update_node_text(id.as_str(), update)?;
        }
        if let Some(p) = position {
            graph = graph.move_node(id.as_str(), p)?;
        }
        let version = self.commit(base, graph, "update node", |_| {})?;
        Ok(Committed {
            version,
            warnings: Vec::new(),
            nodes: vec![id.clone()],
        })
    }

    pub fn remove_nodes(&self, ids: &[NodeId], if_match: Option<u64>) -> Result<Committed, ServiceError> {
        let (_gate, graph, base) = self.begin(if_match)?;
        let graph = graph.remove_nodes(ids)?;
        let version = self.commit(base, graph, "remove nodes", |_| {})?;
        Ok(Committed {
            version,
            warnings: Vec::new(),
            nodes: ids.to_vec(),
        })
    }

    /// Copies the selected subgraph. Copies carry no media.
    pub fn duplicate(&self, ids: &[NodeId], if_match: Option<u64>) -> Result<Committed, ServiceError> {
        let (_gate, graph, base) = self.begin(if_match)?;
        let (graph, mapping) = graph.duplicate_subgraph(ids)?;
        let version = self.commit(base, graph, "duplicate", |_| {})?;
        Ok(Committed {
            version,
            warnings: Vec::new(),
            nodes: mapping.into_iter().map(|(_, new)| new).collect(),
        })
    }

    /// Makes a copy of snapshot `id` the new head.
    pub fn restore(&self, id: u64, if_match: Option<u64>) -> Result<Committed, ServiceError> {
        let (_gate, _, base) = self.begin(if_match)?;
        let graph = self.dir.read_snapshot(&self.manifest(), id)?;
        let version = self.commit(base, graph, &format!("restore {id}"), |_| {})?;
        Ok(Committed {
            version,
            warnings: Vec::new(),
            nodes: Vec::new(),
        })
    }

    pub fn prune(&self, keep: usize) -> Result<PruneOutcome, ServiceError> {
        let _gate = self.gate.try_lock().map_err(|_| ServiceError::Busy)?;
        let mut s = self.state();
        let (next, removed) = self.dir.prune(&s.manifest, keep)?;
        s.manifest = next;
        Ok(PruneOutcome {
            snapshots: s.manifest.snapshots.len(),
            removed,
        })
    }

    fn stage_observer(&self) -> impl Fn(&StageRecord) + Sync + '_ {
        move |r: &StageRecord| {
            self.publish(ProjectEvent::Stage(StageEvent {
                stage: r.stage,
                task: r.task,
                at: r.at,
                error: r.error.clone(),
            }))
        }
    }

    /// Prompt to graph. The result replaces the current graph.
    pub fn generate(&self, prompt: &str, if_match: Option<u64>) -> Result<Committed, ServiceError> {
        let (_gate, _, base) = self.begin(if_match)?;
        let observer = self.stage_observer();
        let out = run_pipeline_observed(prompt, self.backend.as_ref(), &observer)?;
        let nodes = out.graph.node_ids();
        let version = self.commit(base, out.graph, "generate", |m| {
            m.narrative = Some(out.narrative);
            m.transcripts.extend(out.transcripts);
        })?;
        Ok(Committed {
            version,
            warnings: out.warnings,
            nodes,
        })
    }

    pub fn edit(&self, selection: &[NodeId], instruction: &str, if_match: Option<u64>) -> Result<Committed, ServiceError> {
        let (_gate, graph, base) = self.begin(if_match)?;
        let selection = if selection.is_empty() { graph.node_ids() } else { selection.to_vec() };
        let observer = self.stage_observer();
        let recorder = RecordingBackend::observed(self.backend.as_ref(), &observer);
        let edited = edit_nodes(&graph, &selection, instruction, &recorder)?;
        let records = recorder.into_records();
        let version = self.commit(base, edited, "edit", |m| m.transcripts.extend(records))?;
        Ok(Committed {
            version,
            warnings: Vec::new(),
            nodes: selection,
        })
    }

    pub fn extend(&self, anchor: Option<&NodeId>, instruction: &str, if_match: Option<u64>) -> Result<Committed, ServiceError> {
        let (_gate, graph, base) = self.begin(if_match)?;
        let observer = self.stage_observer();
        let recorder = RecordingBackend::observed(self.backend.as_ref(), &observer);
        let (extended, added) = extend_story(&graph, anchor, instruction, &recorder)?;
        let records = recorder.into_records();
        let version = self.commit(base, extended, "extend", |m| m.transcripts.extend(records))?;
        Ok(Committed {
            version,
            warnings: Vec::new(),
            nodes: added,
        })
    }

    /// Routes a conversational request and carries it out. Media jobs are
    /// queued and run in the background; the reply lists their ids.
    pub fn chat(self: &Arc<Self>, request: &ChatRequest, if_match: Option<u64>) -> Result<ChatReply, ServiceError> {
        let graph_present = !self.state().graph.is_empty();
        let mut task = TaskRequest::new(request.utterance.clone(), request.selection.clone(), graph_present);
        task.explicit_command = request.command;
        let routing = route(&task)?;
        let mut reply = ChatReply {
            task_kind: routing.kind,
            routing: routing.clone(),
            version: 0,
            nodes: Vec::new(),
            jobs: Vec::new(),
            export: None,
            warnings: Vec::new(),
        };
        let selection = match routing.scope {
            Scope::Selection => request.selection.clone(),
            Scope::AllNodes | Scope::None => Vec::new(),
        };
        match routing.kind {
            TaskKind::Generate => {
                let done = self.generate(&request.utterance, if_match)?;
                reply.version = done.version;
                reply.nodes = done.nodes;
                reply.warnings = done.warnings;
            }
            TaskKind::Edit => {
                let done = self.edit(&selection, &request.utterance, if_match)?;
                reply.version = done.version;
                reply.nodes = done.nodes;
            }
            TaskKind::Extend => {
                let done = self.extend(selection.last(), &request.utterance, if_match)?;
                reply.version = done.version;
                reply.nodes = done.nodes;
            }
            TaskKind::MediaGen => {
                let kind = media_kind_of(&request.utterance);
                let params = MediaParams::new(kind, self.backend.name()).with_style(request.utterance.trim());
                let jobs = self.enqueue(&selection, &params)?;
                reply.jobs = jobs.iter().map(|j| j.job_id).collect();
                reply.nodes = jobs.iter().map(|j| j.node_id.clone()).collect();
                reply.version = self.info().version;
                self.spawn_media(jobs);
            }
            TaskKind::Export => {
                let sel = if selection.is_empty() {
                    ExportSelection::All
                } else {
                    ExportSelection::Nodes(selection)
                };
                let out = self.export(&sel)?;
                reply.version = self.info().version;
                reply.warnings = out.warnings;
                reply.export = Some(out.inventory);
            }
        }
        if let Some(notice) = &routing.notice {
            reply.warnings.insert(0, notice.clone());
        }
        Ok(reply)
    }

    /// Queues one job per node (all nodes when `selection` is empty) and
    /// records them in the manifest.
    pub fn enqueue(&self, selection: &[NodeId], params: &MediaParams) -> Result<Vec<MediaJob>, ServiceError> {
        let _gate = self.gate.try_lock().map_err(|_| ServiceError::Busy)?;
        let mut s = self.state();
        let selection = if selection.is_empty() { s.graph.node_ids() } else { selection.to_vec() };
        let jobs = enqueue_media(&s.graph, &selection, params, s.manifest.next_job_id())?;
        let mut next = s.manifest.clone();
        next.jobs.extend(jobs.iter().cloned());
        self.dir.save_manifest(&next)?;
        s.manifest = next;
        Ok(jobs)
    }

    /// Runs jobs to completion on the calling thread.
    pub fn process_media(&self, jobs: Vec<MediaJob>) -> Vec<MediaJob> {
        let sink = ProjectSink {
            project: self,
            assets: Mutex::new(HashMap::new()),
        };
        let observer = |e: &JobEvent| {
            {
                let mut s = self.state();
                let asset = sink.assets.lock().expect("asset map").get(&e.job_id).cloned();
                if let Some(job) = s.manifest.jobs.iter_mut().find(|j| j.job_id == e.job_id) {
                    job.status = e.status;
                    job.error = e.error.clone();
                    if e.status == nodestory::JobStatus::Running {
                        job.started_at = Some(e.at);
                    } else {
                        job.finished_at = Some(e.at);
                        job.asset = asset;
                    }
                }
                if let Err(err) = self.dir.save_manifest(&s.manifest) {
                    tracing::warn!("job {} status not saved: {err}", e.job_id);
                }
            }
            self.publish(ProjectEvent::Job(e.clone()));
        };
        process_jobs(jobs, self.backend.as_ref(), &sink, self.workers, &observer)
    }

    /// Runs jobs on a background thread.
    pub fn spawn_media(self: &Arc<Self>, jobs: Vec<MediaJob>) -> std::thread::JoinHandle<Vec<MediaJob>> {
        let project = Arc::clone(self);
        std::thread::spawn(move || project.process_media(jobs))
    }

    /// Writes the export bundle into the project's export directory.
    pub fn export(&self, selection: &ExportSelection) -> Result<ExportOutcome, ServiceError> {
        let _gate = self.gate.try_lock().map_err(|_| ServiceError::Busy)?;
        let graph = self.state().graph.clone();
        let order = sequence_for_export(&graph, selection)?;
        let warnings = export_warnings(&graph, selection);
        let dest = self.dir.fresh_export_dir()?;
        let inventory = export_bundle(&graph, &order, self.dir.root(), &dest)?;
        Ok(ExportOutcome { inventory, warnings })
    }

    pub fn export_manifest(&self, selection: &ExportSelection) -> Result<ExportManifest, ServiceError> {
        let graph = self.state().graph.clone();
        let order = sequence_for_export(&graph, selection)?;
        Ok(build_manifest(&graph, &order)?)
    }

    pub fn export_srt(&self, selection: &ExportSelection) -> Result<String, ServiceError> {
        Ok(render_srt(&self.export_manifest(selection)?))
    }

    pub fn export_storyboard(&self, selection: &ExportSelection) -> Result<String, ServiceError> {
        let graph = self.state().graph.clone();
        let order = sequence_for_export(&graph, selection)?;
        Ok(export_storyboard(&graph, &order)?)
    }
}

/// Writes payloads under the project and commits each attachment as a
/// snapshot.
struct ProjectSink<'a> {
    project: &'a Project,
    assets: Mutex<HashMap<u64, MediaAsset>>,
}

impl AssetSink for ProjectSink<'_> {
    fn commit(
        &self,
        job: &MediaJob,
        payload: &[u8],
        extension: &str,
        duration_s: Option<f64>,
    ) -> Result<MediaAsset, MediaError> {
        let storage = |e: ServiceError| MediaError::Storage(e.to_string());
        let mut s = self.project.state();
        let mut graph = s.graph.clone();
        let asset = nodestory::media::attach_asset(&mut graph, &job.node_id, job.params.clone(), extension, duration_s)?;
        self.project.dir.write_asset(&asset.uri, payload).map_err(storage)?;
        let next = self
            .project
            .dir
            .commit(&s.manifest, &graph, "media", |_| {})
            .map_err(storage)?;
        s.manifest = next;
        s.graph = graph;
        self.assets.lock().expect("asset map").insert(job.job_id, asset.clone());
        Ok(asset)
    }
}

/// Media kind named by a request; narration unless it asks for pictures
/// or video.
pub fn media_kind_of(utterance: &str) -> MediaKind {
    let lower = utterance.to_lowercase();
    let words: Vec<&str> = lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
    let has = |stems: &[&str]| words.iter().any(|w| stems.iter().any(|s| w.starts_with(s)));
    if has(&["video", "clip", "film", "animat"]) {
        MediaKind::Video
    } else if has(&["image", "picture", "illustrat", "draw", "paint"]) {
        MediaKind::Image
    } else {
        MediaKind::Audio
    }
}
