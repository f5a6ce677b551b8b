use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use psimgnn::graph::Graph;

fn labelled_graph() -> impl Strategy<Value = Graph> {
    (1usize..15).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let m = pairs.len();
        (
            Just(n),
            Just(pairs),
            proptest::collection::vec(any::<bool>(), m),
            proptest::collection::btree_map(0..n, "[a-z]{1,3}", 0..n.min(4) + 1),
        )
            .prop_map(|(n, pairs, keep, labels)| {
                let edges = pairs.into_iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| e);
                Graph::new("g", n, edges, labels).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip_is_identity(g in labelled_graph()) {
        let back = Graph::from_json(&g.to_json()).unwrap();
        prop_assert_eq!(back.node_count(), g.node_count());
        prop_assert_eq!(back.edges(), g.edges());
        prop_assert_eq!(back.labels(), g.labels());
    }

    #[test]
    fn degree_sum_is_twice_edge_count(g in labelled_graph()) {
        let total: usize = (0..g.node_count()).map(|v| g.degree(v)).sum();
        prop_assert_eq!(total, 2 * g.edge_count());
    }

    #[test]
    fn induced_subgraph_preserves_adjacency(g in labelled_graph(), pick in proptest::collection::vec(any::<bool>(), 15)) {
        let nodes: Vec<usize> = (0..g.node_count()).filter(|&v| pick[v]).collect();
        prop_assume!(!nodes.is_empty());
        let (sub, map) = g.induced_subgraph(&nodes).unwrap();
        prop_assert_eq!(sub.node_count(), nodes.len());
        for a in 0..sub.node_count() {
            for b in 0..sub.node_count() {
                if a != b {
                    prop_assert_eq!(sub.has_edge(a, b), g.has_edge(map.old_of(a), map.old_of(b)));
                }
            }
        }
        let kept: BTreeSet<usize> = map.old_ids().iter().copied().collect();
        prop_assert_eq!(kept, nodes.iter().copied().collect::<BTreeSet<_>>());
    }
}

#[test]
fn unlabelled_graphs_have_no_labels() {
    let g = Graph::new("p", 3, [(0, 1), (1, 2)], BTreeMap::new()).unwrap();
    assert!(g.labels().is_empty());
}
