//! Per-node media: parameters, versioned assets, rolling context and the
//! generation queue.

mod context;
mod queue;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Capability, TaskName};
use crate::graph::{GraphError, NodeId, StoryGraph};

pub use context::{rolling_context, RollingContext, DEFAULT_CONTEXT_BUDGET};
pub use queue::{
    enqueue_media, process_jobs, AssetSink, JobEvent, JobStatus, MediaJob, MemorySink,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediaKind {
    Audio,
    Image,
    Video,
}

impl MediaKind {
    pub const ALL: [MediaKind; 3] = [MediaKind::Audio, MediaKind::Image, MediaKind::Video];

    pub fn as_str(self) -> &'static str {
        match self {
            MediaKind::Audio => "audio",
            MediaKind::Image => "image",
            MediaKind::Video => "video",
        }
    }

    pub fn task(self) -> TaskName {
        match self {
            MediaKind::Audio => TaskName::Audio,
            MediaKind::Image => TaskName::Image,
            MediaKind::Video => TaskName::Video,
        }
    }

    pub fn capability(self) -> Capability {
        self.task().capability()
    }

    pub fn default_extension(self) -> &'static str {
        match self {
            MediaKind::Audio => "mp3",
            MediaKind::Image => "png",
            MediaKind::Video => "mp4",
        }
    }

    /// Image and video prompts carry the rolling context; narration does not.
    pub fn uses_context(self) -> bool {
        !matches!(self, MediaKind::Audio)
    }
}

impl fmt::Display for MediaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MediaKind {
    type Err = MediaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "audio" => Ok(MediaKind::Audio),
            "image" => Ok(MediaKind::Image),
            "video" => Ok(MediaKind::Video),
            _ => Err(MediaError::UnknownKind(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaParams {
    pub kind: MediaKind,
    pub provider: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style_instructions: Option<String>,
}

impl MediaParams {
    pub fn new(kind: MediaKind, provider: impl Into<String>) -> Self {
        MediaParams {
            kind,
            provider: provider.into(),
            voice: None,
            style_instructions: None,
        }
    }

    pub fn audio(provider: impl Into<String>) -> Self {
        Self::new(MediaKind::Audio, provider)
    }

    pub fn with_voice(mut self, voice: impl Into<String>) -> Self {
        self.voice = Some(voice.into());
        self
    }

    pub fn with_style(mut self, style: impl Into<String>) -> Self {
        self.style_instructions = Some(style.into());
        self
    }

    /// A voice only makes sense for narration.
    pub fn check(&self) -> Result<(), MediaError> {
        if self.voice.is_some() && self.kind != MediaKind::Audio {
            return Err(MediaError::VoiceNotApplicable(self.kind));
        }
        Ok(())
    }
}

/// One generated version of one kind of media for one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaAsset {
    pub asset_id: String,
    pub node_id: NodeId,
    pub kind: MediaKind,
    pub version: u32,
    /// Path relative to the project directory.
    pub uri: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default)]
    pub stale: bool,
    pub params: MediaParams,
}

impl MediaAsset {
    pub fn new(
        node_id: NodeId,
        params: MediaParams,
        version: u32,
        extension: &str,
        duration_s: Option<f64>,
    ) -> Self {
        let kind = params.kind;
        MediaAsset {
            asset_id: format!("{node_id}-{kind}-v{version}"),
            uri: asset_uri(&node_id, kind, version, extension),
            node_id,
            kind,
            version,
            duration_s,
            stale: false,
            params,
        }
    }
}

/// `assets/{node}/{kind}-v{version}.{ext}`
pub fn asset_uri(node: &NodeId, kind: MediaKind, version: u32, extension: &str) -> String {
    format!("assets/{node}/{kind}-v{version}.{extension}")
}

/// Whether a uri stays inside the project directory: `assets/...`, no `..`,
/// not absolute.
pub fn is_safe_asset_uri(uri: &str) -> bool {
    uri.starts_with("assets/")
        && std::path::Path::new(uri)
            .components()
            .all(|c| matches!(c, std::path::Component::Normal(_)))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MediaError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("node {0:?} has no text to generate media from")]
    EmptySegment(NodeId),
    #[error("a voice cannot be set for {0} generation")]
    VoiceNotApplicable(MediaKind),
    #[error("unknown media kind {0:?}")]
    UnknownKind(String),
    #[error("asset storage failed: {0}")]
    Storage(String),
}

/// Current (non-stale) asset per kind, in kind order.
pub fn current_assets(graph: &StoryGraph, node: &str) -> Result<Vec<MediaAsset>, GraphError> {
    let node = graph.require(node)?;
    let mut best: BTreeMap<MediaKind, &MediaAsset> = BTreeMap::new();
    for asset in node.assets.iter().filter(|a| !a.stale) {
        let slot = best.entry(asset.kind).or_insert(asset);
        if asset.version > slot.version {
            *slot = asset;
        }
    }
    Ok(best.into_values().cloned().collect())
}

/// Attaches a new version of `params.kind` media to a node. The previous
/// versions of that kind stay attached but are marked stale.
pub fn attach_asset(
    graph: &mut StoryGraph,
    node: &NodeId,
    params: MediaParams,
    extension: &str,
    duration_s: Option<f64>,
) -> Result<MediaAsset, GraphError> {
    graph.require(node.as_str())?;
    let target = graph
        .nodes
        .iter_mut()
        .find(|n| n.id == *node)
        .expect("checked above");
    let kind = params.kind;
    let version = target
        .assets
        .iter()
        .filter(|a| a.kind == kind)
        .map(|a| a.version)
        .max()
        .unwrap_or(0)
        + 1;
    for prior in target.assets.iter_mut().filter(|a| a.kind == kind) {
        prior.stale = true;
    }
    let asset = MediaAsset::new(node.clone(), params, version, extension, duration_s);
    target.assets.push(asset.clone());
    Ok(asset)
}

/// Drops every stale asset. Returns the new graph and what was removed.
pub fn prune_stale(graph: &StoryGraph) -> (StoryGraph, Vec<MediaAsset>) {
    let mut out = graph.clone();
    let mut removed = Vec::new();
    for node in &mut out.nodes {
        let (stale, keep): (Vec<_>, Vec<_>) = node.assets.drain(..).partition(|a| a.stale);
        node.assets = keep;
        removed.extend(stale);
    }
    (out, removed)
}
