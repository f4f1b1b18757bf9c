//! Graph to deliverables: export order, timed manifest, subtitles,
//! storyboard and the on-disk bundle.

mod bundle;
mod srt;
mod storyboard;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{word_count, NARRATION_WORDS_PER_SECOND};
use crate::graph::{GraphError, NodeId, StoryGraph, TopologyClass};
use crate::media::{current_assets, MediaKind};

pub use bundle::{export_bundle, BundleInventory, BUNDLE_DOCUMENTS};
pub use srt::{format_timestamp, render_srt};
pub use storyboard::export_storyboard;

/// Shortest time any node is shown for.
pub const MIN_ENTRY_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExportError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("nothing to export")]
    EmptyOrder,
    #[error("{} is not a root-to-sink path of the story", render_path(.0))]
    InvalidPath(Vec<NodeId>),
    #[error("asset file missing: {0}")]
    MissingAsset(String),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

fn render_path(path: &[NodeId]) -> String {
    path.iter().map(NodeId::as_str).collect::<Vec<_>>().join(" -> ")
}

/// What to export.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", content = "nodes", rename_all = "snake_case")]
pub enum ExportSelection {
    #[default]
    All,
    Nodes(Vec<NodeId>),
    Path(Vec<NodeId>),
}

/// Export order for a selection.
pub fn sequence_for_export(graph: &StoryGraph, selection: &ExportSelection) -> Result<Vec<NodeId>, ExportError> {
    if graph.is_empty() {
        return Err(GraphError::EmptyGraph.into());
    }
    match selection {
        ExportSelection::All => Ok(graph.topological_order(None)?),
        ExportSelection::Nodes(ids) => Ok(graph.topological_order(Some(ids))?),
        ExportSelection::Path(path) => {
            if graph.enumerate_paths()?.iter().any(|p| p == path) {
                Ok(path.clone())
            } else {
                Err(ExportError::InvalidPath(path.clone()))
            }
        }
    }
}

/// Warnings worth showing before an export, such as concatenated branches.
pub fn export_warnings(graph: &StoryGraph, selection: &ExportSelection) -> Vec<String> {
    let mut out = Vec::new();
    if !matches!(selection, ExportSelection::Path(_))
        && graph.classify_topology().ok() == Some(TopologyClass::Branching)
    {
        out.push(
            "the story branches; exporting without a path plays parallel branches one after another"
                .to_owned(),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRef {
    pub kind: MediaKind,
    pub version: u32,
    pub uri: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub node_id: NodeId,
    pub label: String,
    pub segment: String,
    pub assets: Vec<AssetRef>,
    pub start_s: f64,
    pub end_s: f64,
}

impl ManifestEntry {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn asset(&self, kind: MediaKind) -> Option<&AssetRef> {
        self.assets.iter().find(|a| a.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub entries: Vec<ManifestEntry>,
    pub total_duration_s: f64,
}

/// Seconds a text takes to narrate, never below [`MIN_ENTRY_SECONDS`].
pub fn estimated_duration(text: &str) -> f64 {
    (word_count(text) as f64 / NARRATION_WORDS_PER_SECOND).max(MIN_ENTRY_SECONDS)
}

/// Timeline over `order`: each node lasts as long as its current narration,
/// or the estimate for its text when it has none.
pub fn build_manifest(graph: &StoryGraph, order: &[NodeId]) -> Result<ExportManifest, ExportError> {
    if order.is_empty() {
        return Err(ExportError::EmptyOrder);
    }
    let mut entries = Vec::with_capacity(order.len());
    let mut clock = 0.0;
    for id in order {
        let node = graph.require(id.as_str())?;
        let assets: Vec<AssetRef> = current_assets(graph, id.as_str())?
            .into_iter()
            .map(|a| AssetRef {
                kind: a.kind,
                version: a.version,
                uri: a.uri,
                duration_s: a.duration_s,
            })
            .collect();
        let duration = assets
            .iter()
            .find(|a| a.kind == MediaKind::Audio)
            .and_then(|a| a.duration_s)
            .filter(|d| *d > 0.0)
            .unwrap_or_else(|| estimated_duration(&node.segment));
        let start = clock;
        clock += duration;
        entries.push(ManifestEntry {
            node_id: id.clone(),
            label: node.label.clone(),
            segment: node.segment.clone(),
            assets,
            start_s: start,
            end_s: clock,
        });
    }
    Ok(ExportManifest {
        entries,
        total_duration_s: clock,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{chain, lumina};
    use crate::media::{attach_asset, MediaParams};

    fn ids(list: &[&str]) -> Vec<NodeId> {
        list.iter().map(|s| NodeId::from(*s)).collect()
    }

    #[test]
    fn export_orders() {
        let g = lumina();
        assert_eq!(
            sequence_for_export(&g, &ExportSelection::Path(ids(&["1", "3", "6", "7"]))).unwrap(),
            ids(&["1", "3", "6", "7"])
        );
        assert_eq!(
            sequence_for_export(&g, &ExportSelection::All).unwrap(),
            ids(&["1", "2", "3", "4", "5", "6", "7"])
        );
        assert_eq!(
            sequence_for_export(&g, &ExportSelection::Path(ids(&["1", "5", "7"]))),
            Err(ExportError::InvalidPath(ids(&["1", "5", "7"])))
        );
        assert_eq!(
            sequence_for_export(&StoryGraph::new(), &ExportSelection::All),
            Err(ExportError::Graph(GraphError::EmptyGraph))
        );
    }

    #[test]
    fn branching_full_export_warns() {
        assert_eq!(export_warnings(&lumina(), &ExportSelection::All).len(), 1);
        assert!(export_warnings(&lumina(), &ExportSelection::Path(ids(&["5", "6", "7"]))).is_empty());
        assert!(export_warnings(&chain(&["1", "2"]), &ExportSelection::All).is_empty());
    }

    #[test]
    fn audio_durations_tile_the_timeline() {
        let mut g = chain(&["1", "2"]);
        attach_asset(&mut g, &"1".into(), MediaParams::audio("s"), "mp3", Some(3.0)).unwrap();
        attach_asset(&mut g, &"2".into(), MediaParams::audio("s"), "mp3", Some(2.5)).unwrap();
        let m = build_manifest(&g, &ids(&["1", "2"])).unwrap();
        let spans: Vec<(f64, f64)> = m.entries.iter().map(|e| (e.start_s, e.end_s)).collect();
        assert_eq!(spans, vec![(0.0, 3.0), (3.0, 5.5)]);
        assert_eq!(m.total_duration_s, 5.5);
        assert_eq!(m.entries[0].assets[0].uri, "assets/1/audio-v1.mp3");
    }

    #[test]
    fn estimates_without_audio() {
        let mut g = chain(&["1", "2"]);
        g.nodes[0].segment = vec!["word"; 25].join(" ");
        g.nodes[1].segment = "Hi".into();
        let m = build_manifest(&g, &ids(&["1", "2"])).unwrap();
        assert_eq!(m.entries[0].duration_s(), 10.0);
        assert_eq!(m.entries[1].duration_s(), 1.0);
        assert_eq!(build_manifest(&g, &[]), Err(ExportError::EmptyOrder));
    }
}
