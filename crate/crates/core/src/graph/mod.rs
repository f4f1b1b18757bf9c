//! Story graph data model.
//!
//! A [`StoryGraph`] is a directed acyclic graph of [`StoryNode`]s joined by
//! [`StoryEdge`]s. Values are immutable in practice: every structural edit
//! returns a new graph and leaves its input untouched.

mod edit;
mod format;
mod ids;
mod layout;
mod topology;
pub(crate) mod validate;

use std::borrow::Borrow;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::media::MediaAsset;

pub use edit::{IdMapping, NewNode, TextUpdate};
pub use format::{parse_graph, parse_graph_with, serialize_graph, ParseError, ParseMode};
pub use ids::{compare_ids, fresh_id};
pub use layout::{layout_positions, narrative_layers, BRANCH_ROW_STEP, CONVERGENCE_Y, LAYER_STEP, ORIGIN};
pub use topology::TopologyClass;
pub use validate::{ValidationReport, Violation, Warning};

/// Unknown JSON members carried through a lenient parse.
pub type Extras = Map<String, Value>;

/// Identifier of a node. Numeric strings by convention ("1", "2", ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for NodeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl From<&NodeId> for NodeId {
    fn from(id: &NodeId) -> Self {
        id.clone()
    }
}

impl PartialEq<str> for NodeId {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for NodeId {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

/// Canvas coordinates in abstract pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }
}

/// One scene or event of the story.
#[derive(Debug, Clone, PartialEq)]
pub struct StoryNode {
    pub id: NodeId,
    pub label: String,
    pub segment: String,
    pub position: Position,
    /// Every generated media version for this node, stale ones included.
    pub assets: Vec<MediaAsset>,
    pub extra: Extras,
    pub data_extra: Extras,
}

impl StoryNode {
    pub fn new(
        id: impl Into<NodeId>,
        label: impl Into<String>,
        segment: impl Into<String>,
        position: Position,
    ) -> Self {
        StoryNode {
            id: id.into(),
            label: label.into(),
            segment: segment.into(),
            position,
            assets: Vec::new(),
            extra: Extras::new(),
            data_extra: Extras::new(),
        }
    }
}

/// Narrative flow from `source` to `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoryEdge {
    pub id: String,
    pub source: NodeId,
    pub target: NodeId,
    pub extra: Extras,
}

impl StoryEdge {
    /// Builds an edge with the canonical `e{source}-{target}` id.
    pub fn between(source: impl Into<NodeId>, target: impl Into<NodeId>) -> Self {
        let source = source.into();
        let target = target.into();
        StoryEdge {
            id: canonical_edge_id(&source, &target),
            source,
            target,
            extra: Extras::new(),
        }
    }
}

pub fn canonical_edge_id(source: &NodeId, target: &NodeId) -> String {
    format!("e{source}-{target}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StoryGraph {
    pub nodes: Vec<StoryNode>,
    pub edges: Vec<StoryEdge>,
    /// Shared background text carried along for media consistency.
    pub story_context: Option<String>,
    pub extra: Extras,
}

/// Errors raised by graph queries and structural edits.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("selection is empty")]
    EmptySelection,
    #[error("unknown node {0:?}")]
    UnknownNode(NodeId),
    #[error("connecting {from} -> new node -> {to} would create a cycle")]
    WouldCreateCycle { from: NodeId, to: NodeId },
    #[error("graph is invalid: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

pub(crate) fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl StoryGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&StoryNode> {
        self.nodes.iter().find(|n| n.id.as_str() == id)
    }

    pub(crate) fn node_mut(&mut self, id: &str) -> Option<&mut StoryNode> {
        self.nodes.iter_mut().find(|n| n.id.as_str() == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.node(id).is_some()
    }

    /// Looks a node up, failing with [`GraphError::UnknownNode`].
    pub fn require(&self, id: &str) -> Result<&StoryNode, GraphError> {
        self.node(id)
            .ok_or_else(|| GraphError::UnknownNode(NodeId::from(id)))
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.iter().map(|n| n.id.clone()).collect()
    }

    /// Direct predecessors of `id`, in edge order.
    pub fn predecessors(&self, id: &str) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter(|e| e.target.as_str() == id)
            .map(|e| e.source.clone())
            .collect()
    }

    /// Direct successors of `id`, in edge order.
    pub fn successors(&self, id: &str) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter(|e| e.source.as_str() == id)
            .map(|e| e.target.clone())
            .collect()
    }

    pub fn has_edge(&self, source: &str, target: &str) -> bool {
        self.edges
            .iter()
            .any(|e| e.source.as_str() == source && e.target.as_str() == target)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const LUMINA: &str = include_str!("../../tests/fixtures/lumina.json");

    pub fn lumina() -> StoryGraph {
        parse_graph(LUMINA).expect("fixture parses")
    }

    /// Chain `ids[0] -> ids[1] -> ...` laid out left to right.
    pub fn chain(ids: &[&str]) -> StoryGraph {
        let mut g = StoryGraph::new();
        for (i, id) in ids.iter().enumerate() {
            g.nodes.push(StoryNode::new(
                *id,
                format!("Node {id}"),
                format!("Segment of node {id}."),
                Position::new(50.0 + 300.0 * i as f64, 50.0),
            ));
        }
        for pair in ids.windows(2) {
            g.edges.push(StoryEdge::between(pair[0], pair[1]));
        }
        g
    }
}
