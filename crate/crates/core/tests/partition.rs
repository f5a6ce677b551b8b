use proptest::prelude::*;
use psimgnn::graph::Graph;
use psimgnn::partition::{candidate_communities, fluidc, validate_partition, CommunityState, DEFAULT_MAX_SWEEPS};

fn barbell() -> Graph {
    let mut edges = Vec::new();
    for base in [0, 5] {
        for u in 0..5 {
            for v in u + 1..5 {
                edges.push((base + u, base + v));
            }
        }
    }
    edges.push((4, 5));
    Graph::from_edges(10, &edges).unwrap()
}

/// Random connected graph: a random tree plus extra edges.
fn connected_graph() -> impl Strategy<Value = Graph> {
    (2usize..30).prop_flat_map(|n| {
        let parents: Vec<BoxedStrategy<usize>> = (1..n).map(|v| (0..v).boxed()).collect();
        (Just(n), parents, proptest::collection::vec((0..n, 0..n), 0..n))
    })
    .prop_map(|(n, parents, extra)| {
        let mut edges: Vec<(usize, usize)> = parents.iter().enumerate().map(|(i, &p)| (p, i + 1)).collect();
        for (u, v) in extra {
            let e = (u.min(v), u.max(v));
            if u != v && !edges.iter().any(|&(a, b)| (a.min(b), a.max(b)) == e) {
                edges.push(e);
            }
        }
        Graph::from_edges(n, &edges).unwrap()
    })
}

#[test]
fn barbell_cliques_recovered_in_most_seeds() {
    let g = barbell();
    let left: Vec<usize> = (0..5).collect();
    let right: Vec<usize> = (5..10).collect();
    let hits = (0..50u64)
        .filter(|&s| {
            let r = fluidc(&g, 2, s, DEFAULT_MAX_SWEEPS).unwrap();
            r.communities.contains(&left) && r.communities.contains(&right)
        })
        .count();
    assert!(hits >= 40, "{hits}/50");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_is_valid_deterministic_and_stable(g in connected_graph(), k in 1usize..5, seed in any::<u64>()) {
        let k = k.min(g.node_count());
        let r = fluidc(&g, k, seed, DEFAULT_MAX_SWEEPS).unwrap();
        prop_assert_eq!(r.communities.len(), k);
        validate_partition(g.node_count(), &r.communities).unwrap();
        for (c, (sub, map)) in r.subgraphs.iter().enumerate() {
            prop_assert_eq!(sub.node_count(), r.communities[c].len());
            prop_assert_eq!(map.old_ids(), &r.communities[c][..]);
        }
        prop_assert_eq!(&fluidc(&g, k, seed, DEFAULT_MAX_SWEEPS).unwrap().communities, &r.communities);
        if r.converged {
            let mut state = CommunityState::unassigned(g.node_count(), k);
            for (c, nodes) in r.communities.iter().enumerate() {
                for &v in nodes { state.assign(v, c); }
            }
            for v in 0..g.node_count() {
                let c = state.community_of(v).unwrap();
                prop_assert!(candidate_communities(&state, &g, v).contains(&c) || state.size(c) == 1);
            }
        }
    }
}
