use std::fmt::Write;

use super::{build_manifest, format_timestamp, ExportError};
use crate::graph::{NodeId, StoryGraph};
use crate::media::MediaKind;

/// Markdown storyboard: one section per node in `order`.
pub fn export_storyboard(graph: &StoryGraph, order: &[NodeId]) -> Result<String, ExportError> {
    let manifest = build_manifest(graph, order)?;
    let mut out = String::from("# Storyboard\n");
    let _ = writeln!(
        out,
        "\n{} scenes, {:.3} s in total.",
        manifest.entries.len(),
        manifest.total_duration_s
    );
    for (i, entry) in manifest.entries.iter().enumerate() {
        let reference = |kind: MediaKind| {
            entry
                .asset(kind)
                .map_or_else(|| "none".to_owned(), |a| format!("`{}`", a.uri))
        };
        let _ = writeln!(out, "\n## {}. {}\n", i + 1, entry.label);
        let _ = writeln!(out, "- Node: `{}`", entry.node_id);
        let _ = writeln!(
            out,
            "- Time: {} --> {} ({:.3} s)",
            format_timestamp(entry.start_s),
            format_timestamp(entry.end_s),
            entry.duration_s()
        );
        let _ = writeln!(out, "- Image: {}", reference(MediaKind::Image));
        let _ = writeln!(out, "- Audio: {}", reference(MediaKind::Audio));
        let _ = writeln!(out, "- Video: {}", reference(MediaKind::Video));
        if !entry.segment.is_empty() {
            let _ = writeln!(out, "\n{}", entry.segment);
        }
    }
    Ok(out)
}
