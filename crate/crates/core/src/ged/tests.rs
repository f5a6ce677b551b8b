use super::*;
use crate::graph::Graph;

fn exact(g1: &Graph, g2: &Graph) -> f64 {
    exact_ged_astar(g1, g2, &EditCostModel::unit(), AstarOptions::default())
        .unwrap()
        .value
}

fn labeled(n: usize, edges: &[(usize, usize)], labels: &[&str]) -> Graph {
    let labels = labels.iter().enumerate().map(|(i, l)| (i, l.to_string())).collect();
    Graph::new("", n, edges.to_vec(), labels).unwrap()
}

#[test]
fn exact_examples() {
    let tri = Graph::complete(3);
    let p3 = Graph::path(3);
    assert_eq!(exact(&tri, &tri), 0.0);
    assert_eq!(exact(&tri, &p3), 1.0);
    assert_eq!(exact(&p3, &tri), 1.0);
    assert_eq!(exact(&p3, &Graph::path(1)), 4.0);
    assert_eq!(exact(&Graph::path(1), &p3), 4.0);
    assert_eq!(exact(&Graph::cycle(4), &Graph::path(4)), 1.0);
}

#[test]
fn exact_respects_labels() {
    let a = labeled(2, &[(0, 1)], &["C", "N"]);
    let b = labeled(2, &[(0, 1)], &["N", "C"]);
    let c = labeled(2, &[(0, 1)], &["C", "O"]);
    assert_eq!(exact(&a, &b), 0.0);
    assert_eq!(exact(&a, &c), 1.0);
    assert_eq!(exact(&a, &Graph::path(2)), 2.0);
}

#[test]
fn exact_size_limit_and_timeout() {
    let big = Graph::path(11);
    assert!(matches!(
        exact_ged_astar(&big, &big, &EditCostModel::unit(), AstarOptions::default()),
        Err(GedError::SizeOverLimit { limit: 10, .. })
    ));
    let opts = AstarOptions {
        node_limit: 11,
        timeout: Some(std::time::Duration::ZERO),
    };
    let a = Graph::cycle(10);
    let b = Graph::complete(10);
    assert!(matches!(
        exact_ged_astar(&a, &b, &EditCostModel::unit(), opts),
        Err(GedError::Timeout(_))
    ));
}

#[test]
fn exact_mapping_reproduces_value() {
    let g1 = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]).unwrap();
    let g2 = Graph::from_edges(4, &[(0, 1), (1, 2), (1, 3)]).unwrap();
    let r = exact_ged_astar(&g1, &g2, &EditCostModel::unit(), AstarOptions::default()).unwrap();
    let m = r.mapping.unwrap();
    assert_eq!(edit_path_cost_from_mapping(&g1, &g2, &m, &EditCostModel::unit()).unwrap(), r.value);
}

#[test]
fn edit_path_examples() {
    let unit = EditCostModel::unit();
    let tri = Graph::complete(3);
    let p3 = Graph::path(3);
    let id = vec![Some(0), Some(1), Some(2)];
    assert_eq!(edit_path_cost_from_mapping(&tri, &tri, &id, &unit).unwrap(), 0.0);
    assert_eq!(edit_path_cost_from_mapping(&tri, &p3, &id, &unit).unwrap(), 1.0);
    let p2 = Graph::path(2);
    assert_eq!(edit_path_cost_from_mapping(&p2, &p2, &[None, None], &unit).unwrap(), 6.0);
    assert!(matches!(
        edit_path_cost_from_mapping(&p2, &p2, &[Some(0), Some(0)], &unit),
        Err(GedError::InvalidMapping(_))
    ));
    assert!(edit_path_cost_from_mapping(&p2, &p2, &[Some(0)], &unit).is_err());
    assert!(edit_path_cost_from_mapping(&p2, &p2, &[Some(0), Some(2)], &unit).is_err());
}

#[test]
fn bipartite_examples() {
    let unit = EditCostModel::unit();
    let tri = Graph::complete(3);
    let p3 = Graph::path(3);
    for solver in [Solver::Hungarian, Solver::Vj] {
        assert_eq!(bipartite_ged(&tri, &tri, &unit, solver).unwrap().value, 0.0);
        let r = bipartite_ged(&tri, &p3, &unit, solver).unwrap();
        assert!(r.value >= 1.0);
        assert_eq!(r.method, solver.method());
        let m = r.mapping.unwrap();
        assert_eq!(edit_path_cost_from_mapping(&tri, &p3, &m, &unit).unwrap(), r.value);
        let g = labeled(3, &[(0, 1), (1, 2)], &["C", "N", "O"]);
        assert_eq!(bipartite_ged(&g, &g, &unit, solver).unwrap().value, 0.0);
    }
}

#[test]
fn bipartite_matrix_layout() {
    let m = bipartite_cost_matrix(&Graph::path(2), &Graph::path(1), &EditCostModel::unit());
    assert_eq!(m.size(), 3);
    // substitution rows: |deg i - deg j|
    assert_eq!(m.get(0, 0), 1.0);
    // deletion block diagonal and forbidden off-diagonal
    assert_eq!(m.get(0, 1), 2.0);
    assert_eq!(m.get(0, 2), m.get(1, 1));
    assert!(m.get(0, 2) > 6.0);
    // insertion block
    assert_eq!(m.get(2, 0), 1.0);
    assert_eq!(m.get(2, 1), 0.0);
}

#[test]
fn beam_examples() {
    let unit = EditCostModel::unit();
    let tri = Graph::complete(3);
    let p3 = Graph::path(3);
    let g = Graph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 5)]).unwrap();
    assert_eq!(beam_ged(&g, &g, &unit, 1).unwrap().value, 0.0);
    assert_eq!(beam_ged(&tri, &p3, &unit, 5040).unwrap().value, 1.0);
    assert_eq!(beam_ged(&tri, &p3, &unit, 0), Err(GedError::InvalidWidth));
    let h = Graph::cycle(5);
    let narrow = beam_ged(&g, &h, &unit, 1).unwrap().value;
    let wide = beam_ged(&g, &h, &unit, 100).unwrap().value;
    assert!(narrow >= wide);
    assert_eq!(wide, exact(&g, &h));
}

#[test]
fn cost_model_validation() {
    let mut c = EditCostModel::unit();
    c.node_substitute = 3.0;
    assert!(matches!(c.validate(), Err(GedError::InvalidCostModel(_))));
    c.node_substitute = -1.0;
    assert!(c.validate().is_err());
    let s = EditCostModel {
        node_insert: 2.0,
        ..EditCostModel::unit()
    }
    .swapped();
    assert_eq!((s.node_delete, s.node_insert), (2.0, 1.0));
}

#[test]
fn nged_examples() {
    assert_eq!(nged_similarity(0.0, 60, 60).unwrap(), (0.0, 1.0));
    let (nged, sim) = nged_similarity(6.0, 60, 60).unwrap();
    assert_eq!(nged, 0.1);
    // exp(-0.1) from its alternating series, summed until terms vanish
    let mut series = 0.0;
    let mut term = 1.0;
    for k in 1..30 {
        series += term;
        term *= -0.1 / k as f64;
    }
    assert!((sim - series).abs() < 1e-15);
    assert!((sim - 0.904_837_418_035_959_6).abs() < 1e-15);
    assert!(matches!(nged_similarity(-1.0, 3, 3), Err(GedError::NegativeGed(_))));
    assert!(nged_similarity(f64::NAN, 3, 3).is_err());
    assert_eq!(nged_similarity(1.0, 0, 3), Err(GedError::EmptyGraph));
}

#[test]
fn method_names_round_trip() {
    for m in [
        GedMethod::ExactAstar,
        GedMethod::Hungarian,
        GedMethod::Vj,
        GedMethod::Beam,
        GedMethod::TrimBound,
    ] {
        assert_eq!(m.as_str().parse::<GedMethod>().unwrap(), m);
    }
    assert_eq!("exact".parse::<GedMethod>().unwrap(), GedMethod::ExactAstar);
}
