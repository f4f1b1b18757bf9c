//! On-disk project layout.
//!
//! ```text
//! project.json          manifest; rewriting it is the commit point
//! snapshots/{id}.json   immutable graph documents, head is authoritative
//! graph.json            copy of the head snapshot, refreshed after commit
//! assets/{node}/...     generated media
//! export/               last export bundle
//! ```
//!
//! Every file is written to a temporary sibling, synced and renamed into
//! place, so a crash leaves either the old or the new file.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use nodestory::media::is_safe_asset_uri;
use nodestory::orchestrator::StageRecord;
use nodestory::{parse_graph, serialize_graph, JobStatus, MediaJob, StoryGraph};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const MANIFEST_FILE: &str = "project.json";
pub const GRAPH_FILE: &str = "graph.json";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const ASSET_DIR: &str = "assets";
pub const EXPORT_DIR: &str = "export";
pub const FORMAT_VERSION: u32 = 1;
const TMP_PREFIX: &str = ".tmp-";

/// Called with the destination path just before a rename. An error aborts
/// the write and leaves the temporary file behind, as a crash would.
pub type FaultHook = Arc<dyn Fn(&Path) -> io::Result<()> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotInfo {
    pub snapshot_id: u64,
    pub taken_at: DateTime<Utc>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: u32,
    pub project_id: String,
    pub name: String,
    /// Bumped by every graph commit.
    pub version: u64,
    pub head: u64,
    pub snapshots: Vec<SnapshotInfo>,
    #[serde(default)]
    pub jobs: Vec<MediaJob>,
    #[serde(default)]
    pub transcripts: Vec<StageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub narrative: Option<String>,
    pub created_at: DateTime<Utc>,
}

impl Manifest {
    pub fn next_job_id(&self) -> u64 {
        self.jobs.iter().map(|j| j.job_id).max().unwrap_or(0) + 1
    }

    /// Snapshot ids are never reused, even after pruning.
    fn next_snapshot_id(&self) -> u64 {
        self.snapshots.iter().map(|s| s.snapshot_id).max().unwrap_or(0).max(self.head) + 1
    }

    pub fn snapshot(&self, id: u64) -> Option<&SnapshotInfo> {
        self.snapshots.iter().find(|s| s.snapshot_id == id)
    }
}

pub fn snapshot_file(id: u64) -> String {
    format!("{SNAPSHOT_DIR}/{id:06}.json")
}

/// Writes `bytes` to `target` through a synced temporary file.
pub fn write_atomic(target: &Path, bytes: &[u8], hook: Option<&FaultHook>) -> io::Result<()> {
    let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let mut tmp = tempfile::Builder::new().prefix(TMP_PREFIX).tempfile_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    if let Some(hook) = hook {
        if let Err(e) = hook(target) {
            // Simulated crash: the temporary file stays on disk.
            let _ = tmp.keep();
            return Err(e);
        }
    }
    tmp.persist(target).map_err(|e| e.error)?;
    if let Ok(dir) = fs::File::open(parent) {
        let _ = dir.sync_all();
    }
    Ok(())
}

/// Removes leftover temporary files under `dir`. Returns how many went.
fn sweep_temporaries(dir: &Path) -> io::Result<usize> {
    let mut removed = 0;
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(0);
    };
    for entry in entries {
        let entry = entry?;
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            removed += sweep_temporaries(&path)?;
        } else if entry.file_name().to_string_lossy().starts_with(TMP_PREFIX) {
            fs::remove_file(&path)?;
            removed += 1;
        }
    }
    Ok(removed)
}

#[derive(Clone)]
pub struct ProjectDir {
    root: PathBuf,
    hook: Option<FaultHook>,
}

impl std::fmt::Debug for ProjectDir {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProjectDir")
            .field("root", &self.root)
            .field("hook", &self.hook.is_some())
            .finish()
    }
}

/// A loaded project: the manifest and the head graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub manifest: Manifest,
    pub graph: StoryGraph,
}

impl ProjectDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ProjectDir {
            root: root.into(),
            hook: None,
        }
    }

    pub fn with_fault_hook(mut self, hook: Option<FaultHook>) -> Self {
        self.hook = hook;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn exists(&self) -> bool {
        self.root.join(MANIFEST_FILE).is_file()
    }

    fn write(&self, relative: &str, bytes: &[u8]) -> Result<(), ServiceError> {
        let path = self.root.join(relative);
        write_atomic(&path, bytes, self.hook.as_ref()).map_err(|e| ServiceError::io(&path, e))
    }

    /// Lays out a new project with `graph` as its first snapshot.
    pub fn create(&self, project_id: &str, name: &str, graph: &StoryGraph) -> Result<Loaded, ServiceError> {
        if self.exists() {
            return Err(ServiceError::BadRequest(format!("{} already holds a project", self.root.display())));
        }
        check_graph(graph)?;
        let now = Utc::now();
        let manifest = Manifest {
            format: FORMAT_VERSION,
            project_id: project_id.to_owned(),
            name: name.to_owned(),
            version: 0,
            head: 0,
            snapshots: Vec::new(),
            jobs: Vec::new(),
            transcripts: Vec::new(),
            narrative: None,
            created_at: now,
        };
        let manifest = self.commit(&manifest, graph, "create", |_| {})?;
        Ok(Loaded {
            manifest,
            graph: graph.clone(),
        })
    }

    /// Loads and checks a project. Leftover temporary files are removed,
    /// jobs cut short by a crash are marked failed and the graph mirror is
    /// refreshed. A project that fails the checks is left untouched.
    pub fn open(&self) -> Result<Loaded, ServiceError> {
        let manifest_path = self.root.join(MANIFEST_FILE);
        let corrupt = |path: &Path, message: String| ServiceError::CorruptProject {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(&manifest_path).map_err(|e| {
            if e.kind() == io::ErrorKind::NotFound {
                ServiceError::UnknownProject(self.root.display().to_string())
            } else {
                ServiceError::io(&manifest_path, e)
            }
        })?;
        let mut manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| corrupt(&manifest_path, e.to_string()))?;
        if manifest.format != FORMAT_VERSION {
            return Err(corrupt(&manifest_path, format!("unsupported format {}", manifest.format)));
        }
        if manifest.snapshot(manifest.head).is_none() {
            return Err(corrupt(&manifest_path, format!("head snapshot {} is not listed", manifest.head)));
        }
        let ids: BTreeSet<u64> = manifest.snapshots.iter().map(|s| s.snapshot_id).collect();
        if ids.len() != manifest.snapshots.len() {
            return Err(corrupt(&manifest_path, "duplicate snapshot ids".to_owned()));
        }
        for job in &manifest.jobs {
            if let Some(asset) = &job.asset {
                if !is_safe_asset_uri(&asset.uri) {
                    return Err(corrupt(&manifest_path, format!("job {} has unsafe uri {:?}", job.job_id, asset.uri)));
                }
            }
        }
        let head_path = self.root.join(snapshot_file(manifest.head));
        let head_text = fs::read_to_string(&head_path).map_err(|e| corrupt(&head_path, e.to_string()))?;
        let graph = parse_graph(&head_text).map_err(|e| corrupt(&head_path, e.to_string()))?;
        for node in &graph.nodes {
            if let Some(a) = node.assets.iter().find(|a| !is_safe_asset_uri(&a.uri)) {
                return Err(corrupt(&head_path, format!("asset uri {:?} leaves the project", a.uri)));
            }
        }

        // Checks passed; recovery may now write.
        sweep_temporaries(&self.root).map_err(|e| ServiceError::io(&self.root, e))?;
        let now = Utc::now();
        let mut interrupted = false;
        for job in manifest.jobs.iter_mut().filter(|j| !j.status.is_terminal()) {
            job.status = JobStatus::Failed;
            job.error = Some("interrupted".to_owned());
            job.finished_at = Some(now);
            interrupted = true;
        }
        if interrupted {
            self.save_manifest(&manifest)?;
        }
        self.remove_orphan_snapshots(&manifest)?;
        let mirror = self.root.join(GRAPH_FILE);
        if fs::read_to_string(&mirror).ok().as_deref() != Some(head_text.as_str()) {
            self.write(GRAPH_FILE, head_text.as_bytes())?;
        }
        Ok(Loaded { manifest, graph })
    }

    /// Snapshot files the manifest does not list: writes that never reached
    /// the commit point, or pruned files whose deletion was cut short.
    fn remove_orphan_snapshots(&self, manifest: &Manifest) -> Result<(), ServiceError> {
        let dir = self.root.join(SNAPSHOT_DIR);
        let Ok(entries) = fs::read_dir(&dir) else {
            return Ok(());
        };
        let listed: BTreeSet<String> = manifest
            .snapshots
            .iter()
            .map(|s| snapshot_file(s.snapshot_id))
            .collect();
        for entry in entries {
            let entry = entry.map_err(|e| ServiceError::io(&dir, e))?;
            let name = format!("{SNAPSHOT_DIR}/{}", entry.file_name().to_string_lossy());
            if !listed.contains(&name) {
                fs::remove_file(entry.path()).map_err(|e| ServiceError::io(entry.path(), e))?;
            }
        }
        Ok(())
    }

    /// Records `graph` as the new head. `update` may change other manifest
    /// fields in the same commit. Returns the committed manifest; on error
    /// the project on disk is unchanged.
    pub fn commit(
        &self,
        manifest: &Manifest,
        graph: &StoryGraph,
        reason: &str,
        update: impl FnOnce(&mut Manifest),
    ) -> Result<Manifest, ServiceError> {
        check_graph(graph)?;
        let id = manifest.next_snapshot_id();
        let text = serialize_graph(graph);
        self.write(&snapshot_file(id), text.as_bytes())?;

        let mut next = manifest.clone();
        update(&mut next);
        next.snapshots.push(SnapshotInfo {
            snapshot_id: id,
            taken_at: Utc::now(),
            reason: reason.to_owned(),
        });
        next.head = id;
        next.version += 1;
        self.save_manifest(&next)?;

        if let Err(e) = self.write(GRAPH_FILE, text.as_bytes()) {
            // Committed already; the mirror is rebuilt on the next open.
            tracing::warn!("graph mirror not refreshed: {e}");
        }
        Ok(next)
    }

    /// Rewrites the manifest without touching the graph.
    pub fn save_manifest(&self, manifest: &Manifest) -> Result<(), ServiceError> {
        let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        self.write(MANIFEST_FILE, text.as_bytes())
    }

    pub fn read_snapshot(&self, manifest: &Manifest, id: u64) -> Result<StoryGraph, ServiceError> {
        if manifest.snapshot(id).is_none() {
            return Err(ServiceError::UnknownSnapshot(id));
        }
        let path = self.root.join(snapshot_file(id));
        let text = fs::read_to_string(&path).map_err(|e| ServiceError::io(&path, e))?;
        parse_graph(&text).map_err(|e| ServiceError::CorruptProject {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn write_asset(&self, uri: &str, bytes: &[u8]) -> Result<(), ServiceError> {
        if !is_safe_asset_uri(uri) {
            return Err(ServiceError::BadRequest(format!("asset uri {uri:?} leaves the project")));
        }
        self.write(uri, bytes)
    }

    /// Keeps the newest `keep` snapshots (always including the head) and
    /// deletes the rest, along with asset files no kept snapshot refers to.
    /// Returns the new manifest and the removed paths.
    pub fn prune(&self, manifest: &Manifest, keep: usize) -> Result<(Manifest, Vec<String>), ServiceError> {
        let mut kept: Vec<SnapshotInfo> = manifest.snapshots.clone();
        kept.sort_by_key(|s| s.snapshot_id);
        let cut = kept.len().saturating_sub(keep.max(1));
        let mut dropped: Vec<SnapshotInfo> = kept.drain(..cut).collect();
        if let Some(i) = dropped.iter().position(|s| s.snapshot_id == manifest.head) {
            kept.push(dropped.remove(i));
            kept.sort_by_key(|s| s.snapshot_id);
        }
        let mut next = manifest.clone();
        next.snapshots = kept;

        let mut referenced = BTreeSet::new();
        for info in &next.snapshots {
            for node in self.read_snapshot(manifest, info.snapshot_id)?.nodes {
                referenced.extend(node.assets.into_iter().map(|a| a.uri));
            }
        }
        let mut doomed: Vec<String> = dropped.iter().map(|s| snapshot_file(s.snapshot_id)).collect();
        let mut assets = Vec::new();
        collect_files(&self.root.join(ASSET_DIR), &self.root, &mut assets).map_err(|e| ServiceError::io(&self.root, e))?;
        doomed.extend(assets.into_iter().filter(|uri| !referenced.contains(uri)));

        // Commit first; a crash mid-deletion leaves only unreferenced files.
        self.save_manifest(&next)?;
        for rel in &doomed {
            let path = self.root.join(rel);
            match fs::remove_file(&path) {
                Ok(()) => {}
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(ServiceError::io(&path, e)),
            }
        }
        Ok((next, doomed))
    }

    /// Empties the export directory and returns its path.
    pub fn fresh_export_dir(&self) -> Result<PathBuf, ServiceError> {
        let dir = self.root.join(EXPORT_DIR);
        match fs::remove_dir_all(&dir) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(ServiceError::io(&dir, e)),
        }
        Ok(dir)
    }
}

fn collect_files(dir: &Path, base: &Path, out: &mut Vec<String>) -> io::Result<()> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(());
    };
    for entry in entries {
        let entry = entry?;
        let path = entry.path();
        if entry.file_type()?.is_dir() {
            collect_files(&path, base, out)?;
        } else if let Ok(rel) = path.strip_prefix(base) {
            let rel: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            out.push(rel.join("/"));
        }
    }
    out.sort();
    Ok(())
}

fn check_graph(graph: &StoryGraph) -> Result<(), ServiceError> {
    let report = graph.validate();
    if report.is_ok() {
        Ok(())
    } else {
        Err(ServiceError::InvalidGraph(report.violations))
    }
}
