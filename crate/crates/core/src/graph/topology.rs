//! Roots, sinks, deterministic topological order and path enumeration.
//!
//! Whenever several nodes are ready at once, the one further left on the
//! canvas wins, then the one higher up, then the smaller id (numeric-aware).

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ids::compare_ids;
use super::validate::find_cycle;
use super::{GraphError, NodeId, StoryGraph, StoryNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TopologyClass {
    /// A single chain: one root, one sink, every degree at most one.
    Linear,
    /// Anything else, typically parallel storylines that fork and rejoin.
    Branching,
}

impl std::fmt::Display for TopologyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TopologyClass::Linear => "Linear",
            TopologyClass::Branching => "Branching",
        })
    }
}

impl std::str::FromStr for TopologyClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(TopologyClass::Linear),
            "branching" => Ok(TopologyClass::Branching),
            other => Err(format!("unknown topology class {other:?}")),
        }
    }
}

/// Total order used to break ties between simultaneously ready nodes.
pub(crate) fn tie_break(a: &StoryNode, b: &StoryNode) -> Ordering {
    a.position
        .x
        .total_cmp(&b.position.x)
        .then_with(|| a.position.y.total_cmp(&b.position.y))
        .then_with(|| compare_ids(a.id.as_str(), b.id.as_str()))
}

struct Ready<'a>(&'a StoryNode, usize);

impl PartialEq for Ready<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ready<'_> {}

impl PartialOrd for Ready<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ready<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        tie_break(self.0, other.0).then(self.1.cmp(&other.1))
    }
}

/// Index-based adjacency over a graph whose edges all resolve.
pub(crate) struct Adjacency {
    pub succ: Vec<Vec<usize>>,
    pub in_degree: Vec<usize>,
}

impl Adjacency {
    pub(crate) fn build(graph: &StoryGraph) -> Self {
        let index: HashMap<&str, usize> = graph
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect();
        let n = graph.nodes.len();
        let mut succ = vec![Vec::new(); n];
        let mut in_degree = vec![0; n];
        for edge in &graph.edges {
            if let (Some(&s), Some(&t)) = (
                index.get(edge.source.as_str()),
                index.get(edge.target.as_str()),
            ) {
                succ[s].push(t);
                in_degree[t] += 1;
            }
        }
        Adjacency { succ, in_degree }
    }
}

impl StoryGraph {
    /// Nodes without incoming edges, in stored order.
    pub fn roots(&self) -> Vec<NodeId> {
        let adj = Adjacency::build(self);
        self.nodes
            .iter()
            .zip(&adj.in_degree)
            .filter(|(_, &d)| d == 0)
            .map(|(n, _)| n.id.clone())
            .collect()
    }

    /// Nodes without outgoing edges, in stored order.
    pub fn sinks(&self) -> Vec<NodeId> {
        let adj = Adjacency::build(self);
        self.nodes
            .iter()
            .zip(&adj.succ)
            .filter(|(_, s)| s.is_empty())
            .map(|(n, _)| n.id.clone())
            .collect()
    }

    pub fn classify_topology(&self) -> Result<TopologyClass, GraphError> {
        if self.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let adj = Adjacency::build(self);
        let n = self.nodes.len();
        let chain = adj.in_degree.iter().all(|&d| d <= 1)
            && adj.succ.iter().all(|s| s.len() <= 1)
            && adj.in_degree.iter().filter(|&&d| d == 0).count() == 1
            && adj.succ.iter().filter(|s| s.is_empty()).count() == 1
            && self.edges.len() == n - 1;
        Ok(if chain {
            TopologyClass::Linear
        } else {
            TopologyClass::Branching
        })
    }

    /// Deterministic topological order of the whole graph, or of `selection`
    /// when given. A selection keeps the relative order of the full graph, so
    /// reachability through unselected nodes is respected too.
    pub fn topological_order(&self, selection: Option<&[NodeId]>) -> Result<Vec<NodeId>, GraphError> {
        if self.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let full = self.order_indices()?;
        let Some(selection) = selection else {
            return Ok(full.into_iter().map(|i| self.nodes[i].id.clone()).collect());
        };
        if selection.is_empty() {
            return Err(GraphError::EmptySelection);
        }
        let mut wanted = HashSet::new();
        for id in selection {
            self.require(id.as_str())?;
            wanted.insert(id.as_str());
        }
        Ok(full
            .into_iter()
            .map(|i| &self.nodes[i].id)
            .filter(|id| wanted.contains(id.as_str()))
            .cloned()
            .collect())
    }

    pub(crate) fn order_indices(&self) -> Result<Vec<usize>, GraphError> {
        self.order_with(&Adjacency::build(self))
    }

    fn order_with(&self, adj: &Adjacency) -> Result<Vec<usize>, GraphError> {
        let mut in_degree = adj.in_degree.clone();
        let mut heap: BinaryHeap<Reverse<Ready>> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| in_degree[*i] == 0)
            .map(|(i, n)| Reverse(Ready(n, i)))
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse(Ready(_, i))) = heap.pop() {
            order.push(i);
            for &t in &adj.succ[i] {
                in_degree[t] -= 1;
                if in_degree[t] == 0 {
                    heap.push(Reverse(Ready(&self.nodes[t], t)));
                }
            }
        }
        if order.len() != self.nodes.len() {
            let cycle = find_cycle(&adj.succ).unwrap_or_default();
            return Err(GraphError::Invalid(vec![super::Violation::Cycle {
                cycle: cycle.into_iter().map(|i| self.nodes[i].id.clone()).collect(),
            }]));
        }
        Ok(order)
    }

    /// Every root-to-sink path. Roots and successors are visited in tie-break order.
    pub fn enumerate_paths(&self) -> Result<Vec<Vec<NodeId>>, GraphError> {
        if self.is_empty() {
            return Err(GraphError::EmptyGraph);
        }
        let adj = Adjacency::build(self);
        // Rejects cycles up front so the walk below terminates.
        self.order_with(&adj)?;
        let mut ranked: Vec<usize> = (0..self.nodes.len()).collect();
        ranked.sort_by(|&a, &b| tie_break(&self.nodes[a], &self.nodes[b]));
        let mut rank = vec![0; ranked.len()];
        for (r, &i) in ranked.iter().enumerate() {
            rank[i] = r;
        }
        let by_key = |list: &mut Vec<usize>| list.sort_unstable_by_key(|&i| rank[i]);
        let mut succ = adj.succ.clone();
        for list in &mut succ {
            by_key(list);
        }
        let mut roots: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| adj.in_degree[i] == 0)
            .collect();
        by_key(&mut roots);

        let mut paths = Vec::new();
        let mut trail = Vec::new();
        for root in roots {
            self.walk(root, &succ, &mut trail, &mut paths);
        }
        Ok(paths)
    }

    fn walk(&self, at: usize, succ: &[Vec<usize>], trail: &mut Vec<usize>, out: &mut Vec<Vec<NodeId>>) {
        trail.push(at);
        if succ[at].is_empty() {
            out.push(trail.iter().map(|&i| self.nodes[i].id.clone()).collect());
        } else {
            for &next in &succ[at] {
                self.walk(next, succ, trail, out);
            }
        }
        trail.pop();
    }

    /// All nodes that can reach `id`, excluding `id` itself.
    pub fn ancestors(&self, id: &str) -> Result<HashSet<NodeId>, GraphError> {
        self.require(id)?;
        let mut seen: HashSet<NodeId> = HashSet::new();
        let mut stack = vec![NodeId::from(id)];
        while let Some(current) = stack.pop() {
            for pred in self.predecessors(current.as_str()) {
                if seen.insert(pred.clone()) {
                    stack.push(pred);
                }
            }
        }
        Ok(seen)
    }

    /// Whether a directed path leads from `from` to `to` (a node reaches itself).
    pub fn reaches(&self, from: &str, to: &str) -> bool {
        if from == to {
            return true;
        }
        let mut seen = HashSet::new();
        let mut stack = vec![from.to_owned()];
        while let Some(current) = stack.pop() {
            for next in self.successors(&current) {
                if next.as_str() == to {
                    return true;
                }
                if seen.insert(next.clone()) {
                    stack.push(next.to_string());
                }
            }
        }
        false
    }
}
