use std::collections::{HashMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use super::{canonical_edge_id, NodeId, StoryGraph};

/// A broken graph invariant. Each variant names the offending id.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    #[error("node at index {index} has an empty id")]
    EmptyNodeId { index: usize },
    #[error("duplicate node id {id:?}")]
    DuplicateNodeId { id: NodeId },
    #[error("duplicate edge id {edge_id:?}")]
    DuplicateEdgeId { edge_id: String },
    #[error("edge {edge_id:?} should be named {expected:?}")]
    NonCanonicalEdgeId { edge_id: String, expected: String },
    #[error("edge {edge_id:?} references missing node {endpoint:?}")]
    DanglingEndpoint { edge_id: String, endpoint: NodeId },
    #[error("edge {edge_id:?} loops on node {node:?}")]
    SelfLoop { edge_id: String, node: NodeId },
    #[error("more than one edge from {source_id:?} to {target:?}")]
    DuplicateEdge { source_id: NodeId, target: NodeId },
    #[error("cycle {}", render_cycle(.cycle))]
    Cycle { cycle: Vec<NodeId> },
}

fn render_cycle(cycle: &[NodeId]) -> String {
    cycle
        .iter()
        .map(NodeId::as_str)
        .collect::<Vec<_>>()
        .join(" -> ")
}

/// Conditions that are legal but worth surfacing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// More than one node has no cause; export order between them is a guess.
    MultipleRoots { roots: Vec<NodeId> },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl StoryGraph {
    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

pub(crate) fn validate(graph: &StoryGraph) -> ValidationReport {
    let mut violations = Vec::new();

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, node) in graph.nodes.iter().enumerate() {
        if node.id.as_str().is_empty() {
            violations.push(Violation::EmptyNodeId { index: i });
        }
        if index.insert(node.id.as_str(), i).is_some() {
            violations.push(Violation::DuplicateNodeId {
                id: node.id.clone(),
            });
        }
    }

    let mut edge_ids = HashSet::new();
    let mut pairs = HashSet::new();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); graph.nodes.len()];
    for edge in &graph.edges {
        if !edge_ids.insert(edge.id.as_str()) {
            violations.push(Violation::DuplicateEdgeId {
                edge_id: edge.id.clone(),
            });
        }
        let expected = canonical_edge_id(&edge.source, &edge.target);
        if edge.id != expected {
            violations.push(Violation::NonCanonicalEdgeId {
                edge_id: edge.id.clone(),
                expected,
            });
        }
        let mut dangling = false;
        for endpoint in [&edge.source, &edge.target] {
            if !index.contains_key(endpoint.as_str()) {
                dangling = true;
                violations.push(Violation::DanglingEndpoint {
                    edge_id: edge.id.clone(),
                    endpoint: endpoint.clone(),
                });
            }
        }
        if edge.source == edge.target {
            violations.push(Violation::SelfLoop {
                edge_id: edge.id.clone(),
                node: edge.source.clone(),
            });
            continue;
        }
        if !pairs.insert((edge.source.as_str(), edge.target.as_str())) {
            violations.push(Violation::DuplicateEdge {
                source_id: edge.source.clone(),
                target: edge.target.clone(),
            });
            continue;
        }
        if !dangling {
            adjacency[index[edge.source.as_str()]].push(index[edge.target.as_str()]);
        }
    }

    if let Some(cycle) = find_cycle(&adjacency) {
        violations.push(Violation::Cycle {
            cycle: cycle
                .into_iter()
                .map(|i| graph.nodes[i].id.clone())
                .collect(),
        });
    }

    let mut warnings = Vec::new();
    if violations.is_empty() {
        let roots = graph.roots();
        if roots.len() > 1 {
            warnings.push(Warning::MultipleRoots { roots });
        }
    }

    ValidationReport {
        violations,
        warnings,
    }
}

/// Iterative DFS; returns one witness cycle closed on its first node.
pub(crate) fn find_cycle(adjacency: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let n = adjacency.len();
    let mut mark = vec![Mark::White; n];
    for start in 0..n {
        if mark[start] != Mark::White {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
        mark[start] = Mark::Grey;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&succ) = adjacency[node].get(*next) {
                *next += 1;
                match mark[succ] {
                    Mark::White => {
                        mark[succ] = Mark::Grey;
                        stack.push((succ, 0));
                    }
                    Mark::Grey => {
                        let from = stack.iter().position(|&(v, _)| v == succ).unwrap();
                        let mut cycle: Vec<usize> = stack[from..].iter().map(|&(v, _)| v).collect();
                        cycle.push(succ);
                        return Some(cycle);
                    }
                    Mark::Black => {}
                }
            } else {
                mark[node] = Mark::Black;
                stack.pop();
            }
        }
    }
    None
}
