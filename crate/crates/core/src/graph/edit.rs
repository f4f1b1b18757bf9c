//! Structural editing primitives. Each returns a fresh graph.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ids::{fresh_id, IdAllocator};
use super::layout::{BRANCH_ROW_STEP, LAYER_STEP, ORIGIN};
use super::{GraphError, NodeId, Position, StoryEdge, StoryGraph, StoryNode};

/// Old id to clone id, in the graph's stored node order.
pub type IdMapping = Vec<(NodeId, NodeId)>;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewNode {
    pub label: String,
    pub segment: String,
    pub connect_from: Option<NodeId>,
    pub connect_to: Option<NodeId>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextUpdate {
    pub label: Option<String>,
    pub segment: Option<String>,
}

impl StoryGraph {
    /// Inserts a node with the smallest free numeric id, optionally wired
    /// between `connect_from` and `connect_to`.
    pub fn add_node(&self, new: NewNode) -> Result<(StoryGraph, NodeId), GraphError> {
        let from = new
            .connect_from
            .as_ref()
            .map(|id| self.require(id.as_str()))
            .transpose()?;
        let to = new
            .connect_to
            .as_ref()
            .map(|id| self.require(id.as_str()))
            .transpose()?;
        if let (Some(f), Some(t)) = (from, to) {
            if self.reaches(t.id.as_str(), f.id.as_str()) {
                return Err(GraphError::WouldCreateCycle {
                    from: f.id.clone(),
                    to: t.id.clone(),
                });
            }
        }

        let x = match (from, to) {
            (Some(f), _) => f.position.x + LAYER_STEP,
            (None, Some(t)) => (t.position.x - LAYER_STEP).max(ORIGIN.x),
            (None, None) => self
                .nodes
                .iter()
                .map(|n| n.position.x + LAYER_STEP)
                .fold(ORIGIN.x, f64::max),
        };
        let preferred = from.or(to).map_or(ORIGIN.y, |n| n.position.y);
        let y = self.free_row(x, preferred);

        let id = fresh_id(self);
        let mut out = self.clone();
        out.nodes
            .push(StoryNode::new(id.clone(), new.label, new.segment, Position::new(x, y)));
        if let Some(f) = from {
            out.edges.push(StoryEdge::between(f.id.clone(), id.clone()));
        }
        if let Some(t) = to {
            out.edges.push(StoryEdge::between(id.clone(), t.id.clone()));
        }
        Ok((out, id))
    }

    /// First row at column `x` not already occupied, trying `preferred` first.
    fn free_row(&self, x: f64, preferred: f64) -> f64 {
        let taken = |y: f64| {
            self.nodes.iter().any(|n| {
                (n.position.x - x).abs() < LAYER_STEP / 2.0
                    && (n.position.y - y).abs() < BRANCH_ROW_STEP / 2.0
            })
        };
        std::iter::once(preferred)
            .chain((0..).map(|row| ORIGIN.y + BRANCH_ROW_STEP * row as f64))
            .find(|&y| !taken(y))
            .expect("rows are unbounded")
    }

    /// Replaces a node's label and/or segment. Attached media is kept but
    /// flagged stale when the text actually changes.
    pub fn update_node_text(&self, id: &str, update: TextUpdate) -> Result<StoryGraph, GraphError> {
        self.require(id)?;
        let mut out = self.clone();
        let node = out.node_mut(id).expect("checked above");
        let mut changed = false;
        if let Some(label) = update.label {
            changed |= node.label != label;
            node.label = label;
        }
        if let Some(segment) = update.segment {
            changed |= node.segment != segment;
            node.segment = segment;
        }
        if changed {
            for asset in &mut node.assets {
                asset.stale = true;
            }
        }
        Ok(out)
    }

    pub fn move_node(&self, id: &str, position: Position) -> Result<StoryGraph, GraphError> {
        self.require(id)?;
        let mut out = self.clone();
        out.node_mut(id).expect("checked above").position = position;
        Ok(out)
    }

    /// Removes nodes together with every edge touching them.
    pub fn remove_nodes(&self, ids: &[NodeId]) -> Result<StoryGraph, GraphError> {
        if ids.is_empty() {
            return Err(GraphError::EmptySelection);
        }
        for id in ids {
            self.require(id.as_str())?;
        }
        let gone: HashSet<&str> = ids.iter().map(NodeId::as_str).collect();
        let mut out = self.clone();
        out.nodes.retain(|n| !gone.contains(n.id.as_str()));
        out.edges
            .retain(|e| !gone.contains(e.source.as_str()) && !gone.contains(e.target.as_str()));
        Ok(out)
    }

    /// Clones the selected nodes one branch row lower. Edges inside the
    /// selection are cloned between the copies, and edges entering the
    /// selection from outside are replicated onto the copies, so the duplicate
    /// hangs from the same parents. Media is not copied.
    pub fn duplicate_subgraph(&self, ids: &[NodeId]) -> Result<(StoryGraph, IdMapping), GraphError> {
        if ids.is_empty() {
            return Err(GraphError::EmptySelection);
        }
        for id in ids {
            self.require(id.as_str())?;
        }
        let selected: HashSet<&str> = ids.iter().map(NodeId::as_str).collect();

        let mut alloc = IdAllocator::for_graph(self);
        let mut out = self.clone();
        let mut mapping = IdMapping::new();
        for node in self.nodes.iter().filter(|n| selected.contains(n.id.as_str())) {
            let new_id = alloc.allocate();
            let mut copy = StoryNode::new(
                new_id.clone(),
                node.label.clone(),
                node.segment.clone(),
                Position::new(node.position.x, node.position.y + BRANCH_ROW_STEP),
            );
            copy.data_extra = node.data_extra.clone();
            copy.extra = node.extra.clone();
            out.nodes.push(copy);
            mapping.push((node.id.clone(), new_id));
        }

        let lookup: HashMap<&str, &NodeId> = mapping.iter().map(|(o, n)| (o.as_str(), n)).collect();
        for edge in &self.edges {
            let source_in = selected.contains(edge.source.as_str());
            let target_in = selected.contains(edge.target.as_str());
            match (source_in, target_in) {
                (true, true) => out.edges.push(StoryEdge::between(
                    lookup[edge.source.as_str()].clone(),
                    lookup[edge.target.as_str()].clone(),
                )),
                (false, true) => out.edges.push(StoryEdge::between(
                    edge.source.clone(),
                    lookup[edge.target.as_str()].clone(),
                )),
                _ => {}
            }
        }
        Ok((out, mapping))
    }
}
