use super::*;

fn desk_config() -> DatasetConfig {
    DatasetConfig {
        trims_per_basic: 28,
        ..DatasetConfig::ba(20, 7)
    }
}

fn bare_manifest(count: usize) -> DatasetManifest {
    DatasetManifest {
        name: "bare".into(),
        graphs: (0..count)
            .map(|i| DerivedGraph {
                graph: Graph::path(2).with_id(format!("g{i:03}")),
                root_id: format!("g{i:03}"),
                trim_ged: 0,
                partition_seed: 0,
            })
            .collect(),
        pairs: Vec::new(),
        splits: None,
    }
}

#[test]
fn desk_scale_counts_and_invariants() {
    let m = build_ba_dataset(&desk_config()).unwrap();
    // trims are counted per basic graph: 2 + 2 * 28
    assert_eq!(m.graphs.len(), 58);
    assert_eq!(m.pairs.len(), 58 * 58);
    m.validate().unwrap();
    let s = m.splits().unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (35, 12, 11));
    for g in &m.graphs {
        assert!(g.graph.is_connected());
        assert!(g.graph.node_count().abs_diff(20) <= 10);
        assert!(g.trim_ged <= 10);
        if !g.is_basic() {
            let p = m.pair(&g.root_id, g.id()).unwrap();
            assert!(p.ged <= g.trim_ged);
        }
    }
    for p in &m.pairs {
        let q = m.pair(&p.id2, &p.id1).unwrap();
        assert_eq!((p.ged, p.provenance), (q.ged, q.provenance));
        let (n1, n2) = (
            m.graph(&p.id1).unwrap().graph.node_count(),
            m.graph(&p.id2).unwrap().graph.node_count(),
        );
        assert_eq!(p.nged, p.ged as f64 / ((n1 + n2) as f64 / 2.0));
        assert_eq!(p.sim, (-p.nged).exp());
    }
    assert_eq!(m.train_pairs().unwrap().len(), 35 * 35);
    assert_eq!(m.val_pairs().unwrap().len(), 12 * 47);
    assert_eq!(m.test_pairs().unwrap().len(), 11 * 47);
}

#[test]
fn trim_targets_cycle_near_uniformly() {
    let config = DatasetConfig::ba(12, 1);
    let graphs = generate_graphs(&config).unwrap();
    assert_eq!(graphs.len(), 200);
    let mut counts = [0usize; 11];
    for g in graphs.iter().filter(|g| g.root_id == "ba12-0" && !g.is_basic()) {
        counts[g.trim_ged as usize] += 1;
    }
    assert_eq!(counts[1..], [10, 10, 10, 10, 10, 10, 10, 10, 10, 9]);
    assert_eq!(graphs[1].id(), "ba12-0-t00");
}

#[test]
fn generation_is_deterministic() {
    let a = generate_graphs(&desk_config()).unwrap();
    let b = generate_graphs(&desk_config()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn split_counts_and_determinism() {
    let m = bare_manifest(200);
    let s = split_dataset(&m, DEFAULT_SPLIT, 3).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (120, 40, 40));
    assert_eq!(split_dataset(&m, DEFAULT_SPLIT, 3).unwrap(), s);
    assert_ne!(split_dataset(&m, DEFAULT_SPLIT, 4).unwrap(), s);
    let s = split_dataset(&bare_manifest(60), DEFAULT_SPLIT, 0).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (36, 12, 12));
    assert!(split_dataset(&m, (0.5, 0.2, 0.2), 0).is_err());
    assert!(split_dataset(&m, (1.2, -0.1, -0.1), 0).is_err());
}

#[test]
fn ground_truth_examples() {
    let basic = DerivedGraph {
        graph: Graph::path(5).with_id("b"),
        root_id: "b".into(),
        trim_ged: 0,
        partition_seed: 1,
    };
    let r = ground_truth(&basic, &basic, &GroundTruthOptions::default()).unwrap();
    assert_eq!((r.ged, r.sim, r.provenance), (0, 1.0, Provenance::Exact));

    let (t, _) = trim(&basic.graph, 4, 9).unwrap();
    let derived = DerivedGraph {
        graph: t.with_id("b-t0"),
        root_id: "b".into(),
        trim_ged: 4,
        partition_seed: 2,
    };
    let no_exact = GroundTruthOptions {
        exact_node_limit: 0,
        ..Default::default()
    };
    let c = ged_candidates(&basic, &derived, &no_exact).unwrap();
    assert!(c.contains(&(Provenance::Trim, 4)));
    let r = ground_truth(&basic, &derived, &no_exact).unwrap();
    assert!(r.ged <= 4);
    assert!(c.iter().all(|&(_, v)| r.ged <= v));
}

#[test]
fn triangle_candidate_only_for_siblings() {
    let mk = |id: &str, root: &str, t| DerivedGraph {
        graph: Graph::path(4).with_id(id),
        root_id: root.into(),
        trim_ged: t,
        partition_seed: 0,
    };
    let opts = GroundTruthOptions::default();
    let c = ged_candidates(&mk("x-1", "x", 3), &mk("x-2", "x", 2), &opts).unwrap();
    assert!(c.contains(&(Provenance::TrimTriangle, 5)));
    let c = ged_candidates(&mk("x-1", "x", 3), &mk("y-2", "y", 2), &opts).unwrap();
    assert!(c.iter().all(|(p, _)| !matches!(p, Provenance::Trim | Provenance::TrimTriangle)));
}

#[test]
fn select_minimum_prefers_direct_evidence_on_ties() {
    let c = [(Provenance::Beam, 3), (Provenance::Trim, 3), (Provenance::Hungarian, 4)];
    assert_eq!(select_minimum(&c), (Provenance::Trim, 3));
    let c = [(Provenance::Beam, 2), (Provenance::Trim, 3)];
    assert_eq!(select_minimum(&c), (Provenance::Beam, 2));
}

#[test]
fn save_load_round_trip() {
    let config = DatasetConfig {
        trims_per_basic: 4,
        ..DatasetConfig::ba(10, 5)
    };
    let m = build_ba_dataset(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_manifest(&m, dir.path()).unwrap();
    assert_eq!(load_manifest(dir.path()).unwrap(), m);
    let csv = std::fs::read_to_string(dir.path().join("pairs.csv")).unwrap();
    assert!(csv.starts_with("id1,id2,ged,nged,sim,provenance\n"));
    assert!(dir.path().join("graphs/ba10-0-t03.json").exists());

    // a second save over the same directory leaves no temporaries behind
    save_manifest(&m, dir.path()).unwrap();
    let leftovers = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "tmp"))
        .count();
    assert_eq!(leftovers, 0);
}

#[test]
fn load_rejects_corrupt_pairs() {
    let config = DatasetConfig {
        trims_per_basic: 2,
        ..DatasetConfig::ba(8, 5)
    };
    let m = build_ba_dataset(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_manifest(&m, dir.path()).unwrap();
    let path = dir.path().join("pairs.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
    std::fs::write(&path, truncated).unwrap();
    assert!(matches!(load_manifest(dir.path()), Err(DatasetError::Invalid(_))));
}
