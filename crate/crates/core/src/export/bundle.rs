use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{build_manifest, export_storyboard, render_srt, ExportError};
use crate::graph::{serialize_graph, NodeId, StoryGraph};
use crate::media::is_safe_asset_uri;

/// Documents written into every bundle, in this order.
pub const BUNDLE_DOCUMENTS: [&str; 4] = ["graph.json", "subtitles.srt", "storyboard.md", "manifest.json"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BundleInventory {
    pub root: PathBuf,
    /// Paths relative to `root`.
    pub documents: Vec<String>,
    pub assets: Vec<String>,
}

fn io_error(path: &Path, e: std::io::Error) -> ExportError {
    ExportError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes the bundle for `order` into `destination`. Asset files are looked
/// up under `asset_root` by their relative uri and copied, not re-encoded.
/// Every referenced asset is checked before anything is written.
pub fn export_bundle(
    graph: &StoryGraph,
    order: &[NodeId],
    asset_root: &Path,
    destination: &Path,
) -> Result<BundleInventory, ExportError> {
    let manifest = build_manifest(graph, order)?;
    let mut uris: Vec<&str> = manifest
        .entries
        .iter()
        .flat_map(|e| e.assets.iter().map(|a| a.uri.as_str()))
        .collect();
    uris.sort_unstable();
    uris.dedup();
    for uri in &uris {
        if !is_safe_asset_uri(uri) {
            return Err(ExportError::MissingAsset(format!("{uri} (not a relative asset path)")));
        }
        if !asset_root.join(uri).is_file() {
            return Err(ExportError::MissingAsset((*uri).to_owned()));
        }
    }

    let manifest_json = serde_json::to_string_pretty(&manifest.entries).expect("manifest serializes") + "\n";
    let documents = [
        serialize_graph(graph),
        render_srt(&manifest),
        export_storyboard(graph, order)?,
        manifest_json,
    ];
    fs::create_dir_all(destination).map_err(|e| io_error(destination, e))?;
    for (name, body) in BUNDLE_DOCUMENTS.iter().zip(&documents) {
        let path = destination.join(name);
        fs::write(&path, body).map_err(|e| io_error(&path, e))?;
    }
    for uri in &uris {
        let target = destination.join(uri);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
        fs::copy(asset_root.join(uri), &target).map_err(|e| io_error(&target, e))?;
    }
    Ok(BundleInventory {
        root: destination.to_path_buf(),
        documents: BUNDLE_DOCUMENTS.iter().map(|s| (*s).to_owned()).collect(),
        assets: uris.iter().map(|s| (*s).to_owned()).collect(),
    })
}
