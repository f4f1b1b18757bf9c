//! Rewriting selected nodes, and appending new ones.

use std::collections::HashSet;

use super::pipeline::reason_nodes;
use super::{prompts, OrchestratorError, Stage};
use crate::backend::{BackendRequest, GenerativeBackend, TaskName};
use crate::graph::{GraphError, NewNode, NodeId, StoryGraph, TextUpdate};

/// Splits an editor answer `label TAB segment`. Without a TAB the whole
/// answer is the segment and the label is kept.
pub fn parse_edit_response(answer: &str) -> (Option<String>, String) {
    let flat = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    match answer.trim().split_once('\t') {
        Some((label, segment)) => {
            let label = flat(label);
            (Some(label).filter(|l| !l.is_empty()), flat(segment))
        }
        None => (None, flat(answer)),
    }
}

/// Rewrites the selected nodes. Either every selected node is updated or the
/// call fails and nothing changes. Ids, positions and edges are untouched.
pub fn edit_nodes(
    graph: &StoryGraph,
    selection: &[NodeId],
    instruction: &str,
    backend: &dyn GenerativeBackend,
) -> Result<StoryGraph, OrchestratorError> {
    if selection.is_empty() {
        return Err(GraphError::EmptySelection.into());
    }
    if instruction.trim().is_empty() {
        return Err(OrchestratorError::Precondition("edit instruction is empty"));
    }
    for id in selection {
        graph.require(id.as_str())?;
    }
    let wanted: HashSet<&str> = selection.iter().map(NodeId::as_str).collect();

    // Every answer is collected against the original graph before any change.
    let mut updates = Vec::new();
    for node in graph.nodes.iter().filter(|n| wanted.contains(n.id.as_str())) {
        let id = node.id.as_str();
        let context = graph
            .predecessors(id)
            .iter()
            .chain(graph.successors(id).iter())
            .filter_map(|n| graph.node(n.as_str()))
            .map(|n| n.segment.as_str())
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("\n\n");
        let request = BackendRequest::new(
            TaskName::Edit,
            prompts::edit(instruction, &node.label, &node.segment, &context),
        )
        .param("instruction", instruction)
        .param("label", node.label.as_str())
        .param("segment", node.segment.as_str())
        .param("context", context);
        let answer = backend
            .complete(&request)
            .and_then(|r| r.into_text())
            .map_err(|e| OrchestratorError::from(e).at(Stage::Edit))?;
        let (label, segment) = parse_edit_response(&answer);
        if segment.is_empty() {
            return Err(OrchestratorError::InvalidEdit {
                node: id.to_owned(),
                message: "empty segment".to_owned(),
            });
        }
        updates.push((node.id.clone(), TextUpdate {
            label,
            segment: Some(segment),
        }));
    }

    let mut out = graph.clone();
    for (id, update) in updates {
        out = out.update_node_text(id.as_str(), update)?;
    }
    Ok(out)
}

/// Appends generated events after `anchor` (by default the last node in
/// narrative order), chained in the order the reasoner returns them.
pub fn extend_story(
    graph: &StoryGraph,
    anchor: Option<&NodeId>,
    instruction: &str,
    backend: &dyn GenerativeBackend,
) -> Result<(StoryGraph, Vec<NodeId>), OrchestratorError> {
    let anchor = match anchor {
        Some(id) => graph.require(id.as_str())?.id.clone(),
        None => graph
            .topological_order(None)?
            .pop()
            .ok_or(GraphError::EmptyGraph)?,
    };
    let anchor_segment = graph.require(anchor.as_str())?.segment.clone();
    let key = format!("{instruction}\n{anchor_segment}");
    let request = BackendRequest::new(TaskName::Generate, prompts::extend(instruction, &anchor_segment))
        .param("mode", "extend")
        .param("prompt", key)
        .param("instruction", instruction)
        .param("anchor", anchor.as_str());
    let text = backend
        .complete(&request)
        .and_then(|r| r.into_text())
        .map_err(|e| OrchestratorError::from(e).at(Stage::Extend))?;
    let drafts = reason_nodes(&text, backend).map_err(|e| e.at(Stage::Extend))?;

    let mut out = graph.clone();
    let mut previous = anchor;
    let mut added = Vec::new();
    for draft in drafts {
        let (next, id) = out.add_node(NewNode {
            label: draft.label,
            segment: draft.segment,
            connect_from: Some(previous),
            connect_to: None,
        })?;
        out = next;
        previous = id.clone();
        added.push(id);
    }
    Ok((out, added))
}
