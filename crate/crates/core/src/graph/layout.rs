//! Column/row layout matching hand-authored story canvases: one column per
//! layer 300 units apart, parallel rows 500 units apart, and lone nodes after
//! a fork sitting on the convergence row.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::ids::compare_ids;
use super::topology::Adjacency;
use super::{GraphError, NodeId, Position, StoryGraph};

/// Top-left slot of the canvas.
pub const ORIGIN: Position = Position::new(50.0, 50.0);
/// Horizontal distance between consecutive layers.
pub const LAYER_STEP: f64 = 300.0;
/// Vertical distance between parallel rows within a layer.
pub const BRANCH_ROW_STEP: f64 = 500.0;
/// Row used by single-node layers once the story has forked.
pub const CONVERGENCE_Y: f64 = 300.0;

/// Assigns positions to layered nodes. Returned in layer order, then row order.
pub fn layout_positions(layers: &[Vec<NodeId>]) -> Vec<(NodeId, Position)> {
    let mut out = Vec::new();
    let mut forked = false;
    for (layer, members) in layers.iter().enumerate() {
        let x = ORIGIN.x + LAYER_STEP * layer as f64;
        if members.len() == 1 {
            let y = if forked { CONVERGENCE_Y } else { ORIGIN.y };
            out.push((members[0].clone(), Position::new(x, y)));
            continue;
        }
        if members.len() > 1 {
            forked = true;
        }
        for (row, id) in members.iter().enumerate() {
            out.push((
                id.clone(),
                Position::new(x, ORIGIN.y + BRANCH_ROW_STEP * row as f64),
            ));
        }
    }
    out
}

/// Groups nodes into layers by longest path from the first root.
///
/// Nodes are visited in topological order with ties broken by numeric-aware
/// id. A node with predecessors sits one layer past its deepest predecessor;
/// a root that is not the first visited node is treated as following the node
/// visited just before it, so late-introduced threads stay in narrative order.
pub fn narrative_layers(graph: &StoryGraph) -> Result<Vec<Vec<NodeId>>, GraphError> {
    let adj = Adjacency::build(graph);
    let n = graph.nodes.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (s, targets) in adj.succ.iter().enumerate() {
        for &t in targets {
            preds[t].push(s);
        }
    }

    let key = |i: usize| IdKey(graph.nodes[i].id.as_str(), i);
    let mut in_degree = adj.in_degree.clone();
    let mut heap: BinaryHeap<Reverse<IdKey>> = (0..n)
        .filter(|&i| in_degree[i] == 0)
        .map(|i| Reverse(key(i)))
        .collect();

    let mut layer_of = vec![0usize; n];
    let mut previous: Option<usize> = None;
    let mut visited = 0;
    while let Some(Reverse(IdKey(_, i))) = heap.pop() {
        layer_of[i] = match (preds[i].iter().map(|&p| layer_of[p] + 1).max(), previous) {
            (Some(layer), _) => layer,
            (None, Some(prev)) => layer_of[prev] + 1,
            (None, None) => 0,
        };
        previous = Some(i);
        visited += 1;
        for &t in &adj.succ[i] {
            in_degree[t] -= 1;
            if in_degree[t] == 0 {
                heap.push(Reverse(key(t)));
            }
        }
    }
    if visited != n {
        return Err(GraphError::Invalid(graph.validate().violations));
    }

    // Rebuild membership in visiting order so rows follow narrative order.
    let order = {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| layer_of[a].cmp(&layer_of[b]).then_with(|| compare_ids(graph.nodes[a].id.as_str(), graph.nodes[b].id.as_str())));
        order
    };
    let depth = layer_of.iter().max().map_or(0, |m| m + 1);
    let mut layers: Vec<Vec<NodeId>> = vec![Vec::new(); depth];
    for i in order {
        layers[layer_of[i]].push(graph.nodes[i].id.clone());
    }
    Ok(layers)
}

struct IdKey<'a>(&'a str, usize);

impl PartialEq for IdKey<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.1 == other.1
    }
}

impl Eq for IdKey<'_> {}

impl PartialOrd for IdKey<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for IdKey<'_> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        compare_ids(self.0, other.0).then(self.1.cmp(&other.1))
    }
}

impl StoryGraph {
    /// Recomputes every node position from the graph structure.
    pub fn relayout(&self) -> Result<StoryGraph, GraphError> {
        let layers = narrative_layers(self)?;
        let positions: HashMap<NodeId, Position> = layout_positions(&layers).into_iter().collect();
        let mut out = self.clone();
        for node in &mut out.nodes {
            node.position = positions[&node.id];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{chain, lumina};

    fn layer(ids: &[&str]) -> Vec<NodeId> {
        ids.iter().map(|s| NodeId::from(*s)).collect()
    }

    #[test]
    fn linear_chain_runs_along_the_top_row() {
        let placed = layout_positions(&[layer(&["1"]), layer(&["2"]), layer(&["3"]), layer(&["4"])]);
        let xs: Vec<f64> = placed.iter().map(|(_, p)| p.x).collect();
        assert_eq!(xs, vec![50.0, 350.0, 650.0, 950.0]);
        assert!(placed.iter().all(|(_, p)| p.y == 50.0));
    }

    #[test]
    fn parallel_rows_then_convergence_row() {
        let placed = layout_positions(&[layer(&["1"]), layer(&["2", "3", "4"]), layer(&["5"])]);
        let ys: Vec<f64> = placed.iter().map(|(_, p)| p.y).collect();
        assert_eq!(ys, vec![50.0, 50.0, 550.0, 1050.0, 300.0]);
    }

    #[test]
    fn reference_graph_layers_reproduce_its_positions() {
        let g = lumina();
        let layers = narrative_layers(&g).unwrap();
        assert_eq!(
            layers,
            vec![layer(&["1"]), layer(&["2", "3", "4"]), layer(&["5"]), layer(&["6"]), layer(&["7"])]
        );
        assert_eq!(g.relayout().unwrap(), g);
    }

    #[test]
    fn chain_layers() {
        let g = chain(&["1", "2", "3"]);
        assert_eq!(narrative_layers(&g).unwrap().len(), 3);
        assert_eq!(narrative_layers(&StoryGraph::new()).unwrap(), Vec::<Vec<NodeId>>::new());
    }
}
