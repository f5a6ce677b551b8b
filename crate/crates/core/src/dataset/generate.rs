use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::graph::Graph;

/// Barabási–Albert graph: `m` isolated seed nodes, then each new node links
/// to `m` distinct existing nodes chosen with probability proportional to
/// degree (uniformly while every degree is zero).
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<Graph, DatasetError> {
    if n < 2 || m == 0 || m >= n {
        return Err(DatasetError::InvalidParameters(format!(
            "BA model needs n >= 2 and 1 <= m < n, got n = {n}, m = {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; n];
    let mut edges = Vec::with_capacity((n - m) * m);
    let mut chosen = Vec::with_capacity(m);
    for v in m..n {
        chosen.clear();
        let total: usize = degree[..v].iter().sum();
        for _ in 0..m {
            let target = if total == 0 {
                let free: Vec<usize> = (0..v).filter(|u| !chosen.contains(u)).collect();
                *free.choose(&mut rng).expect("m < v leaves a free node")
            } else {
                let remaining = total - chosen.iter().map(|&u| degree[u]).sum::<usize>();
                let mut r = rng.gen_range(0..remaining);
                (0..v)
                    .filter(|u| !chosen.contains(u))
                    .find(|&u| {
                        if r < degree[u] {
                            true
                        } else {
                            r -= degree[u];
                            false
                        }
                    })
                    .expect("draw falls inside the remaining degree mass")
            };
            chosen.push(target);
        }
        for &u in &chosen {
            edges.push((u, v));
        }
        for &u in &chosen {
            degree[u] += 1;
        }
        degree[v] += m;
    }
    Ok(Graph::from_edges(n, &edges)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrimOpKind {
    DeleteLeaf,
    AddLeaf,
    AddEdge,
}

impl TrimOpKind {
    pub const ALL: [TrimOpKind; 3] = [TrimOpKind::DeleteLeaf, TrimOpKind::AddLeaf, TrimOpKind::AddEdge];

    /// Edit cost of one application.
    pub fn ged_cost(self) -> u32 {
        match self {
            TrimOpKind::DeleteLeaf | TrimOpKind::AddLeaf => 2,
            TrimOpKind::AddEdge => 1,
        }
    }

    fn feasible(self, g: &Graph) -> bool {
        let n = g.node_count();
        match self {
            TrimOpKind::DeleteLeaf => n >= 2 && (0..n).any(|v| g.degree(v) == 1),
            TrimOpKind::AddLeaf => true,
            TrimOpKind::AddEdge => g.edge_count() < n * (n - 1) / 2,
        }
    }

    /// Applies one random instance of the op; the caller checks feasibility.
    fn apply(self, g: &Graph, rng: &mut ChaCha8Rng) -> Result<Graph, DatasetError> {
        let n = g.node_count();
        let out = match self {
            TrimOpKind::DeleteLeaf => {
                let leaves: Vec<usize> = (0..n).filter(|&v| g.degree(v) == 1).collect();
                let leaf = *leaves.choose(rng).expect("feasible");
                let keep: Vec<usize> = (0..n).filter(|&v| v != leaf).collect();
                g.induced_subgraph(&keep)?.0
            }
            TrimOpKind::AddLeaf => {
                let anchor = rng.gen_range(0..n);
                let mut edges = g.edges().to_vec();
                edges.push((anchor, n));
                Graph::new(g.id(), n + 1, edges, g.labels().clone())?
            }
            TrimOpKind::AddEdge => {
                let missing: Vec<(usize, usize)> = (0..n)
                    .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
                    .filter(|&(u, v)| !g.has_edge(u, v))
                    .collect();
                let e = *missing.choose(rng).expect("feasible");
                let mut edges = g.edges().to_vec();
                edges.push(e);
                Graph::new(g.id(), n, edges, g.labels().clone())?
            }
        };
        Ok(out.with_id(g.id()))
    }
}

impl fmt::Display for TrimOpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrimOpKind::DeleteLeaf => "delete_leaf",
            TrimOpKind::AddLeaf => "add_leaf",
            TrimOpKind::AddEdge => "add_edge",
        })
    }
}

/// Attempts per trim before giving up; each retry reseeds the op sampler.
pub const TRIM_ATTEMPTS: usize = 32;

/// Random edit sequence whose bookkept costs sum exactly to `target_ged`.
///
/// Each step picks uniformly among op kinds that fit the remaining budget
/// and have at least one legal application. Returns the edited graph and
/// the ops applied.
pub fn trim(g: &Graph, target_ged: u32, seed: u64) -> Result<(Graph, Vec<TrimOpKind>), DatasetError> {
    if target_ged == 0 {
        return Err(DatasetError::InvalidParameters("trim target must be at least 1".into()));
    }
    if !g.is_connected() {
        return Err(DatasetError::InvalidParameters("trim input must be connected".into()));
    }
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..TRIM_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seeder.gen());
        if let Some(done) = trim_attempt(g, target_ged, &mut rng)? {
            return Ok(done);
        }
    }
    Err(DatasetError::TrimInfeasible {
        graph: g.id().to_string(),
        target: target_ged,
    })
}

fn trim_attempt(
    g: &Graph,
    target: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(Graph, Vec<TrimOpKind>)>, DatasetError> {
    let mut current = g.clone();
    let mut ops = Vec::new();
    let mut budget = target;
    while budget > 0 {
        let kinds: Vec<TrimOpKind> = TrimOpKind::ALL
            .into_iter()
            .filter(|k| k.ged_cost() <= budget && k.feasible(&current))
            .collect();
        let Some(&kind) = kinds.choose(rng) else {
            return Ok(None);
        };
        current = kind.apply(&current, rng)?;
        ops.push(kind);
        budget -= kind.ged_cost();
    }
    Ok(Some((current, ops)))
}
