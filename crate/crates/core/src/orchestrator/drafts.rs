//! Node drafts and the line-oriented draft list.
//!
//! ```text
//! list       = line+
//! line       = ordinal TAB label TAB segment TAB successors LF
//! ordinal    = 1, 2, ... n, in order
//! successors = "" | ordinal *("," ordinal)
//! ```
//! Blank lines and code-fence lines are ignored. Spaces around successor
//! ordinals are tolerated. Label and segment may not contain TAB or LF.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::graph::validate::find_cycle;
use crate::graph::{NodeId, Position, StoryEdge, StoryGraph, StoryNode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDraft {
    pub ordinal: u32,
    pub label: String,
    pub segment: String,
    pub successors: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DraftParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for DraftParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for DraftParseError {}

pub fn parse_drafts(text: &str) -> Result<Vec<NodeDraft>, DraftParseError> {
    let mut drafts = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let fail = |message: String| DraftParseError { line, message };
        let content = raw.trim_end_matches('\r');
        if content.trim().is_empty() || content.trim_start().starts_with("```") {
            continue;
        }
        let fields: Vec<&str> = content.split('\t').collect();
        if fields.len() != 4 {
            return Err(fail(format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        let ordinal: u32 = fields[0]
            .trim()
            .parse()
            .map_err(|_| fail(format!("ordinal {:?} is not a number", fields[0])))?;
        let expected = drafts.len() as u32 + 1;
        if ordinal != expected {
            return Err(fail(format!("expected ordinal {expected}, found {ordinal}")));
        }
        let label = fields[1].trim();
        let segment = fields[2].trim();
        if label.is_empty() {
            return Err(fail("empty label".to_owned()));
        }
        if segment.is_empty() {
            return Err(fail("empty segment".to_owned()));
        }
        let successors = fields[3]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<u32>()
                    .map_err(|_| fail(format!("successor {s:?} is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        drafts.push(NodeDraft {
            ordinal,
            label: label.to_owned(),
            segment: segment.to_owned(),
            successors,
        });
    }
    if drafts.is_empty() {
        return Err(DraftParseError {
            line: 0,
            message: "no drafts".to_owned(),
        });
    }
    Ok(drafts)
}

pub fn render_drafts(drafts: &[NodeDraft]) -> String {
    let flat = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    drafts
        .iter()
        .map(|d| {
            let succ: Vec<String> = d.successors.iter().map(u32::to_string).collect();
            format!(
                "{}\t{}\t{}\t{}\n",
                d.ordinal,
                flat(&d.label),
                flat(&d.segment),
                succ.join(",")
            )
        })
        .collect()
}

/// Builds the graph: ids are the ordinals, edges follow successor lists
/// (duplicates dropped), positions come from the layer layout.
pub fn diagram(drafts: &[NodeDraft]) -> Result<StoryGraph, OrchestratorError> {
    if drafts.is_empty() {
        return Err(OrchestratorError::Precondition("no drafts to diagram"));
    }
    let index: HashMap<u32, usize> = drafts.iter().enumerate().map(|(i, d)| (d.ordinal, i)).collect();
    if index.len() != drafts.len() {
        return Err(OrchestratorError::Precondition("draft ordinals are not unique"));
    }

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); drafts.len()];
    for (i, d) in drafts.iter().enumerate() {
        let mut seen = HashSet::new();
        for &s in &d.successors {
            let Some(&target) = index.get(&s) else {
                return Err(OrchestratorError::DanglingSuccessor {
                    ordinal: d.ordinal,
                    successor: s,
                });
            };
            if seen.insert(s) {
                adjacency[i].push(target);
            }
        }
    }
    if let Some(cycle) = find_cycle(&adjacency) {
        return Err(OrchestratorError::CyclicDrafts(
            cycle.into_iter().map(|i| drafts[i].ordinal).collect(),
        ));
    }

    let mut graph = StoryGraph::new();
    for d in drafts {
        graph.nodes.push(StoryNode::new(
            d.ordinal.to_string(),
            d.label.clone(),
            d.segment.clone(),
            Position::new(0.0, 0.0),
        ));
    }
    for (i, targets) in adjacency.iter().enumerate() {
        for &t in targets {
            graph
                .edges
                .push(StoryEdge::between(graph.nodes[i].id.clone(), graph.nodes[t].id.clone()));
        }
    }
    Ok(graph.relayout()?)
}

/// Drafts describing an existing graph, numbered in topological order.
pub fn drafts_from_graph(graph: &StoryGraph) -> Result<Vec<NodeDraft>, OrchestratorError> {
    let order = graph.topological_order(None)?;
    let ordinal: HashMap<&NodeId, u32> = order.iter().zip(1..).collect();
    Ok(order
        .iter()
        .map(|id| {
            let node = graph.node(id.as_str()).expect("ordered ids exist");
            NodeDraft {
                ordinal: ordinal[id],
                label: node.label.clone(),
                segment: node.segment.clone(),
                successors: graph
                    .successors(id.as_str())
                    .iter()
                    .map(|s| ordinal[s])
                    .collect(),
            }
        })
        .collect())
}
