use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lsa::{hungarian, lapjv, CostMatrix};
use super::{edit_path_cost_from_mapping, invert_mapping, EditCostModel, GedError, GedMethod, GedResult};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Hungarian,
    Vj,
}

impl Solver {
    pub fn method(self) -> GedMethod {
        match self {
            Solver::Hungarian => GedMethod::Hungarian,
            Solver::Vj => GedMethod::Vj,
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.method().as_str())
    }
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hungarian" => Ok(Solver::Hungarian),
            "vj" | "lapjv" => Ok(Solver::Vj),
            other => Err(format!("unknown assignment solver {other:?}")),
        }
    }
}

/// The `(n1 + n2)`-square assignment matrix with degree-difference edge estimates.
///
/// Forbidden cells of the deletion and insertion blocks hold a finite
/// stand-in larger than any feasible assignment's total.
pub fn bipartite_cost_matrix(g1: &Graph, g2: &Graph, cost: &EditCostModel) -> CostMatrix {
    let (n1, n2) = (g1.node_count(), g2.node_count());
    let n = n1 + n2;
    let mut data = vec![0.0; n * n];
    let mut forbidden = Vec::new();
    for i in 0..n1 {
        let di = g1.degree(i);
        for j in 0..n2 {
            let dj = g2.degree(j);
            let edges = if di >= dj {
                (di - dj) as f64 * cost.edge_delete
            } else {
                (dj - di) as f64 * cost.edge_insert
            };
            data[i * n + j] = cost.substitution(g1.label(i), g2.label(j)) + edges;
        }
        for k in 0..n1 {
            let cell = i * n + n2 + k;
            if k == i {
                data[cell] = cost.node_delete + di as f64 * cost.edge_delete;
            } else {
                forbidden.push(cell);
            }
        }
    }
    for k in 0..n2 {
        for j in 0..n2 {
            let cell = (n1 + k) * n + j;
            if k == j {
                data[cell] = cost.node_insert + g2.degree(j) as f64 * cost.edge_insert;
            } else {
                forbidden.push(cell);
            }
        }
    }
    let big = 1.0 + data.iter().sum::<f64>();
    for cell in forbidden {
        data[cell] = big;
    }
    CostMatrix::new(n, data).expect("finite square matrix")
}

fn mapping_one_way(g1: &Graph, g2: &Graph, cost: &EditCostModel, solver: Solver) -> Vec<Option<usize>> {
    let m = bipartite_cost_matrix(g1, g2, cost);
    let assignment = match solver {
        Solver::Hungarian => hungarian(&m),
        Solver::Vj => lapjv(&m),
    };
    let n2 = g2.node_count();
    assignment.row_to_col[..g1.node_count()]
        .iter()
        .map(|&j| (j < n2).then_some(j))
        .collect()
}

/// Assignment-based GED upper bound, run in both argument orders.
pub fn bipartite_ged(g1: &Graph, g2: &Graph, cost: &EditCostModel, solver: Solver) -> Result<GedResult, GedError> {
    cost.validate()?;
    let forward = mapping_one_way(g1, g2, cost, solver);
    let forward_value = edit_path_cost_from_mapping(g1, g2, &forward, cost)?;
    let backward = invert_mapping(&mapping_one_way(g2, g1, &cost.swapped(), solver), g1.node_count());
    let backward_value = edit_path_cost_from_mapping(g1, g2, &backward, cost)?;
    let (value, mapping) = if backward_value < forward_value {
        (backward_value, backward)
    } else {
        (forward_value, forward)
    };
    Ok(GedResult {
        value,
        method: solver.method(),
        mapping: Some(mapping),
    })
}
