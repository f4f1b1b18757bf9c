#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use nodestory::media::{attach_asset, MediaKind, MediaParams};
use nodestory::{NodeId, Position, StoryEdge, StoryGraph, StoryNode};
use proptest::prelude::*;

/// Text with the characters that tend to break serializers.
pub fn arb_text() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(String::new()),
        "[a-zA-Z ,.'!?]{1,40}",
        "[\\PC\"\\\\\n\t]{0,24}",
    ]
}

fn arb_coord() -> impl Strategy<Value = f64> {
    prop_oneof![
        (0i32..40).prop_map(|k| 50.0 + 300.0 * f64::from(k % 8) + f64::from(k / 8)),
        -1.0e6..1.0e6f64,
    ]
}

/// A valid graph of up to `max_nodes` nodes. Edges only run from earlier to
/// later entries of a random permutation, so the result is acyclic, and ids
/// are distinct but not in stored order.
pub fn arb_graph(max_nodes: usize) -> impl Strategy<Value = StoryGraph> {
    (1..=max_nodes)
        .prop_flat_map(|n| {
            (
                Just(n),
                Just((1..=n).collect::<Vec<usize>>()).prop_shuffle(),
                proptest::collection::vec(any::<bool>(), n * (n - 1) / 2),
                proptest::collection::vec((arb_text(), arb_text(), arb_coord(), arb_coord()), n),
                proptest::option::of(arb_text()),
                proptest::collection::vec(0u8..4, n),
            )
        })
        .prop_map(|(n, perm, bits, texts, story_context, media)| {
            let mut g = StoryGraph::new();
            for (i, (label, segment, x, y)) in texts.into_iter().enumerate() {
                g.nodes.push(StoryNode::new(perm[i].to_string(), label, segment, Position::new(x, y)));
            }
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if bits[k] {
                        g.edges.push(StoryEdge::between(perm[i].to_string(), perm[j].to_string()));
                    }
                    k += 1;
                }
            }
            g.story_context = story_context;
            for (i, versions) in media.into_iter().enumerate() {
                let id = NodeId::from(perm[i].to_string());
                for _ in 0..versions {
                    attach_asset(&mut g, &id, MediaParams::audio("scripted").with_voice("narrator"), "mp3", Some(2.5))
                        .unwrap();
                }
                if versions == 3 {
                    attach_asset(&mut g, &id, MediaParams::new(MediaKind::Image, "scripted"), "png", None).unwrap();
                }
            }
            g
        })
}

/// A graph plus a non-empty subset of its node ids.
pub fn arb_graph_and_selection(max_nodes: usize) -> impl Strategy<Value = (StoryGraph, Vec<NodeId>)> {
    arb_graph(max_nodes).prop_flat_map(|g| {
        let ids = g.node_ids();
        let n = ids.len();
        (Just(g), proptest::sample::subsequence(ids, 1..=n))
    })
}

/// Brute-force ancestor set by repeated relaxation over the edge list.
pub fn brute_ancestors(g: &StoryGraph, node: &str) -> BTreeSet<String> {
    let mut set: HashSet<String> = HashSet::new();
    loop {
        let before = set.len();
        for e in &g.edges {
            if e.target.as_str() == node || set.contains(e.target.as_str()) {
                set.insert(e.source.as_str().to_owned());
            }
        }
        if set.len() == before {
            return set.into_iter().collect();
        }
    }
}

/// Node `i` of a chain gets `words[i]` words of text.
pub fn chain_with_words(words: &[usize]) -> StoryGraph {
    let mut g = StoryGraph::new();
    for (i, &w) in words.iter().enumerate() {
        let id = (i + 1).to_string();
        let segment = vec!["word"; w].join(" ");
        g.nodes.push(StoryNode::new(id.clone(), format!("Scene {id}"), segment, Position::new(50.0 + 300.0 * i as f64, 50.0)));
        if i > 0 {
            g.edges.push(StoryEdge::between(i.to_string(), id));
        }
    }
    g
}

pub fn lumina_text() -> &'static str {
    include_str!("../fixtures/lumina.json")
}
