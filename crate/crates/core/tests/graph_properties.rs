mod common;

use common::{arb_graph, arb_graph_and_selection, arb_text, lumina_text};
use nodestory::{parse_graph, serialize_graph, NewNode, NodeId, StoryGraph, TextUpdate};
use proptest::prelude::*;
use serde_json::Value;

fn node_objects(text: &str) -> Vec<Value> {
    let doc: Value = serde_json::from_str(text).unwrap();
    doc["nodes"].as_array().unwrap().clone()
}

fn edges_value(text: &str) -> Value {
    let doc: Value = serde_json::from_str(text).unwrap();
    doc["edges"].clone()
}

fn assert_order_sound(g: &StoryGraph, order: &[NodeId]) {
    let index = |id: &NodeId| order.iter().position(|o| o == id);
    for e in &g.edges {
        if let (Some(s), Some(t)) = (index(&e.source), index(&e.target)) {
            assert!(s < t, "edge {} violated by {order:?}", e.id);
        }
    }
}

#[test]
fn lumina_listing_round_trips() {
    let g = parse_graph(lumina_text()).unwrap();
    assert_eq!((g.nodes.len(), g.edges.len()), (7, 8));
    assert!(g.validate().is_ok());
    let original: Value = serde_json::from_str(lumina_text()).unwrap();
    let again: Value = serde_json::from_str(&serialize_graph(&g)).unwrap();
    assert_eq!(original, again);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn serialize_then_parse_is_identity(g in arb_graph(15)) {
        let text = serialize_graph(&g);
        let back = parse_graph(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(serialize_graph(&back), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn topological_order_respects_edges_and_is_stable((g, selection) in arb_graph_and_selection(12)) {
        let full = g.topological_order(None).unwrap();
        prop_assert_eq!(full.len(), g.nodes.len());
        assert_order_sound(&g, &full);
        prop_assert_eq!(&g.topological_order(None).unwrap(), &full);

        let part = g.topological_order(Some(&selection)).unwrap();
        prop_assert_eq!(part.len(), selection.len());
        assert_order_sound(&g, &part);
    }

    #[test]
    fn structural_edits_keep_the_graph_valid(
        (g, selection) in arb_graph_and_selection(10),
        label in arb_text(),
        segment in arb_text(),
        wire in 0u8..4,
    ) {
        let anchor = selection[0].clone();
        let new = NewNode {
            label: label.clone(),
            segment: segment.clone(),
            connect_from: (wire & 1 == 1).then(|| anchor.clone()),
            connect_to: (wire & 2 == 2).then(|| selection[selection.len() - 1].clone()).filter(|t| *t != anchor),
        };
        match g.add_node(new) {
            Ok((added, id)) => {
                prop_assert!(added.validate().is_ok());
                prop_assert!(!g.contains(id.as_str()));
                prop_assert_eq!(added.nodes.len(), g.nodes.len() + 1);
            }
            Err(e) => prop_assert!(matches!(e, nodestory::GraphError::WouldCreateCycle { .. }), "{}", e),
        }

        let update = TextUpdate { label: Some(label), segment: Some(segment) };
        let updated = g.update_node_text(anchor.as_str(), update).unwrap();
        prop_assert!(updated.validate().is_ok());

        let (dup, mapping) = g.duplicate_subgraph(&selection).unwrap();
        prop_assert!(dup.validate().is_ok());
        prop_assert_eq!(mapping.len(), selection.len());
        prop_assert_eq!(&dup.nodes[..g.nodes.len()], &g.nodes[..]);
    }

    #[test]
    fn text_update_touches_one_node_only((g, selection) in arb_graph_and_selection(10), segment in arb_text()) {
        let target = &selection[0];
        let unchanged = g.node(target.as_str()).unwrap().segment == segment;
        let updated = g
            .update_node_text(target.as_str(), TextUpdate { label: None, segment: Some(segment) })
            .unwrap();
        let (before, after) = (serialize_graph(&g), serialize_graph(&updated));
        prop_assert_eq!(edges_value(&before), edges_value(&after));
        for (old, new) in node_objects(&before).iter().zip(node_objects(&after).iter()) {
            if old["id"] != target.as_str() {
                prop_assert_eq!(old, new);
            } else {
                prop_assert_eq!(&old["position"], &new["position"]);
                prop_assert_eq!(&old["data"]["label"], &new["data"]["label"]);
            }
        }
        let node = updated.node(target.as_str()).unwrap();
        if unchanged {
            prop_assert_eq!(&node.assets, &g.node(target.as_str()).unwrap().assets);
        } else {
            prop_assert!(node.assets.iter().all(|a| a.stale));
        }
    }
}
