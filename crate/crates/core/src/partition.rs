//! Fluid Communities partitioning.
//!
//! `k` communities start on `k` random seed vertices, each with total
//! density 1 spread evenly over its members. Vertices are visited in a fresh
//! random order every sweep and move to the community with the largest
//! aggregated density over their ego network; the run stops after a sweep in
//! which nothing changed.
//!
//! Density sums are compared exactly: the aggregated density of community
//! `c` at a vertex is `count_c / size_c`, so two candidates are compared by
//! cross-multiplying integers.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError, IdMap};

pub const DEFAULT_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("graph is not connected")]
    Disconnected,
    #[error("community count {k} out of range 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("malformed partition document: {0}")]
    Malformed(String),
}

/// Community membership during a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityState {
    assignment: Vec<Option<usize>>,
    sizes: Vec<usize>,
}

impl CommunityState {
    /// Empty state: every vertex unassigned, `k` communities of size 0.
    pub fn unassigned(n: usize, k: usize) -> Self {
        Self {
            assignment: vec![None; n],
            sizes: vec![0; k],
        }
    }

    /// State with each seed vertex alone in its own community.
    pub fn seeded(n: usize, seeds: &[usize]) -> Self {
        let mut s = Self::unassigned(n, seeds.len());
        for (c, &v) in seeds.iter().enumerate() {
            s.assign(v, c);
        }
        s
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn community_of(&self, v: usize) -> Option<usize> {
        self.assignment[v]
    }

    pub fn size(&self, c: usize) -> usize {
        self.sizes[c]
    }

    /// `1 / size(c)`.
    pub fn density(&self, c: usize) -> f64 {
        1.0 / self.sizes[c] as f64
    }

    pub fn assigned_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_some()).count()
    }

    /// Moves `v` into `c`, updating both affected community sizes.
    pub fn assign(&mut self, v: usize, c: usize) {
        if let Some(old) = self.assignment[v] {
            self.sizes[old] -= 1;
        }
        self.assignment[v] = Some(c);
        self.sizes[c] += 1;
    }

    fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (v, c) in self.assignment.iter().enumerate() {
            if let Some(c) = c {
                out[*c].push(v);
            }
        }
        out
    }
}

/// Candidate communities of maximal aggregated density over `{v} ∪ Γ(v)`.
pub fn candidate_communities(state: &CommunityState, g: &Graph, v: usize) -> Vec<usize> {
    let mut counts = vec![0usize; state.k()];
    for w in std::iter::once(v).chain(g.neighbors(v).iter().copied()) {
        if let Some(c) = state.assignment[w] {
            counts[c] += 1;
        }
    }
    // compare counts[a]/sizes[a] against counts[b]/sizes[b] exactly
    let cmp = |a: usize, b: usize| (counts[a] * state.sizes[b]).cmp(&(counts[b] * state.sizes[a]));
    let mut best: Vec<usize> = Vec::new();
    for c in (0..state.k()).filter(|&c| counts[c] > 0) {
        match best.first().map(|&b| cmp(c, b)) {
            None | Some(Ordering::Greater) => {
                best.clear();
                best.push(c);
            }
            Some(Ordering::Equal) => best.push(c),
            Some(Ordering::Less) => {}
        }
    }
    best
}

/// Applies the update rule to `v`. Returns true if its community changed.
///
/// A vertex keeps its community if it is among the candidates, or if it is
/// the last member of that community. Otherwise it moves to a candidate
/// drawn uniformly; the RNG is consumed only when there is more than one.
pub fn update_vertex(state: &mut CommunityState, g: &Graph, v: usize, rng: &mut impl Rng) -> bool {
    let candidates = candidate_communities(state, g, v);
    if candidates.is_empty() {
        return false;
    }
    let current = state.assignment[v];
    if let Some(c) = current {
        if candidates.contains(&c) || state.sizes[c] == 1 {
            return false;
        }
    }
    let pick = if candidates.len() == 1 {
        candidates[0]
    } else {
        candidates[rng.gen_range(0..candidates.len())]
    };
    state.assign(v, pick);
    true
}

/// Output of [`fluidc`]: communities in seed order plus their induced subgraphs.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionResult {
    pub k: usize,
    pub seed: u64,
    /// Sorted node ids per community.
    pub communities: Vec<Vec<usize>>,
    pub subgraphs: Vec<(Graph, IdMap)>,
    pub converged: bool,
    pub sweeps: usize,
}

#[derive(Serialize, Deserialize)]
struct PartitionDoc {
    k: usize,
    seed: u64,
    communities: Vec<Vec<usize>>,
}

impl PartitionResult {
    /// Rebuilds a result from stored communities, re-validating them.
    pub fn from_communities(g: &Graph, seed: u64, communities: Vec<Vec<usize>>) -> Result<Self, PartitionError> {
        let subgraphs = extract_subgraphs(g, &communities)?;
        Ok(Self {
            k: communities.len(),
            seed,
            communities,
            subgraphs,
            converged: true,
            sweeps: 0,
        })
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(&PartitionDoc {
            k: self.k,
            seed: self.seed,
            communities: self.communities.clone(),
        })
        .expect("partition serializes")
    }

    pub fn from_json(g: &Graph, bytes: &[u8]) -> Result<Self, PartitionError> {
        let doc: PartitionDoc = serde_json::from_slice(bytes).map_err(|e| PartitionError::Malformed(e.to_string()))?;
        if doc.k != doc.communities.len() {
            return Err(PartitionError::InvalidPartition(format!(
                "k = {} but {} communities listed",
                doc.k,
                doc.communities.len()
            )));
        }
        Self::from_communities(g, doc.seed, doc.communities)
    }

    /// Community id of every node.
    pub fn assignment(&self, n: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; n];
        for (c, nodes) in self.communities.iter().enumerate() {
            for &v in nodes {
                out[v] = c;
            }
        }
        out
    }
}

/// Partitions a connected graph into `k` communities.
///
/// Deterministic in `(g, k, seed)`. Stops once a full sweep changes nothing,
/// or after `max_sweeps` sweeps (logged as a warning). If vertices are still
/// unassigned at the cap, sweeping continues until every vertex has a
/// community; such a result reports `converged = false`.
pub fn fluidc(g: &Graph, k: usize, seed: u64, max_sweeps: usize) -> Result<PartitionResult, PartitionError> {
    let n = g.node_count();
    if k == 0 || k > n {
        return Err(PartitionError::InvalidK { k, n });
    }
    if !g.is_connected() {
        return Err(PartitionError::Disconnected);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut state = CommunityState::seeded(n, &order[..k]);

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_sweeps || state.assigned_count() < n {
        order.shuffle(&mut rng);
        let mut changed = false;
        for &v in &order {
            changed |= update_vertex(&mut state, g, v, &mut rng);
        }
        sweeps += 1;
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("fluidc: no convergence after {sweeps} sweeps (k = {k}, seed = {seed})");
    }
    let communities = state.communities();
    let subgraphs = extract_subgraphs(g, &communities)?;
    Ok(PartitionResult {
        k,
        seed,
        communities,
        subgraphs,
        converged,
        sweeps,
    })
}

/// Induced subgraph of every community, in community order.
pub fn extract_subgraphs(g: &Graph, communities: &[Vec<usize>]) -> Result<Vec<(Graph, IdMap)>, PartitionError> {
    validate_partition(g.node_count(), communities)?;
    communities
        .iter()
        .enumerate()
        .map(|(c, nodes)| {
            let (sub, map) = g.induced_subgraph(nodes)?;
            Ok((sub.with_id(format!("{}/{}", g.id(), c)), map))
        })
        .collect()
}

/// Checks that `communities` are nonempty, disjoint and cover `0..n`.
pub fn validate_partition(n: usize, communities: &[Vec<usize>]) -> Result<(), PartitionError> {
    let mut seen = vec![false; n];
    for (c, nodes) in communities.iter().enumerate() {
        if nodes.is_empty() {
            return Err(PartitionError::InvalidPartition(format!("community {c} is empty")));
        }
        for &v in nodes {
            if v >= n {
                return Err(PartitionError::InvalidPartition(format!("node {v} out of range")));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(PartitionError::InvalidPartition(format!("node {v} appears twice")));
            }
        }
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(PartitionError::InvalidPartition(format!("node {v} not covered")));
    }
    Ok(())
}
