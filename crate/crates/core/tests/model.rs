use proptest::prelude::*;
use psimgnn::dataset::generate_ba;
use psimgnn::graph::Graph;
use psimgnn::model::{ModelConfig, PSimGnn, PreparedGraph};
use psimgnn::partition::PartitionResult;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn relabelled(g: &Graph, p: &PreparedGraph, seed: u64) -> PreparedGraph {
    let mut perm: Vec<usize> = (0..g.node_count()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let gp = g.permuted(&perm).unwrap();
    let comms = p
        .partition
        .communities
        .iter()
        .map(|c| {
            let mut c: Vec<usize> = c.iter().map(|&v| perm[v]).collect();
            c.sort_unstable();
            c
        })
        .collect();
    let part = PartitionResult::from_communities(&gp, p.partition.seed, comms).unwrap();
    PreparedGraph::from_partition(&gp, part)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forward_is_symmetric_invariant_and_bounded(
        n1 in 6usize..20,
        n2 in 6usize..20,
        ba_m in 1usize..3,
        m in prop::sample::select(vec![0usize, 3, 9]),
        t in 1usize..4,
        seed in any::<u64>(),
    ) {
        let model = PSimGnn::new(ModelConfig { m, t, init_seed: seed % 97, ..Default::default() }).unwrap();
        let g1 = generate_ba(n1, ba_m, seed).unwrap();
        let g2 = generate_ba(n2, ba_m, seed.wrapping_add(1)).unwrap();
        let p1 = model.prepare(&g1, seed).unwrap();
        let p2 = model.prepare(&g2, seed.rotate_left(9)).unwrap();

        let (s, stats) = model.predict_with_stats(&p1, &p2).unwrap();
        prop_assert!(s > 0.0 && s < 1.0);
        prop_assert_eq!(stats.propagation_steps, m * t);

        let swapped = model.predict(&p2, &p1).unwrap();
        prop_assert!((s - swapped).abs() < 1e-9, "swap {} vs {}", s, swapped);

        let q1 = relabelled(&g1, &p1, seed ^ 1);
        let q2 = relabelled(&g2, &p2, seed ^ 2);
        let permuted = model.predict(&q1, &q2).unwrap();
        prop_assert!((s - permuted).abs() < 1e-9, "relabel {} vs {}", s, permuted);
    }
}
