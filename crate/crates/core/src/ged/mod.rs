//! Graph edit distance under a node/edge edit cost model.
//!
//! Three solvers share one search space over node mappings: [`exact_ged_astar`]
//! (exact, tiny graphs only), [`beam_ged`] (truncated level-wise search) and
//! [`bipartite_ged`] (linear sum assignment on a degree-based cost matrix,
//! solved by either [`lsa::hungarian`] or [`lsa::lapjv`]). Approximate values
//! are always recomputed from a complete edit path, so they are upper bounds.
//!
//! A mapping is a `Vec<Option<usize>>` indexed by `g1` nodes: `Some(j)`
//! substitutes node `j` of `g2`, `None` deletes the node. `g2` nodes outside
//! the image are inserted.

mod astar;
mod beam;
mod bipartite;
pub mod lsa;
mod search;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

pub use astar::{exact_ged_astar, AstarOptions, DEFAULT_NODE_LIMIT};
pub use beam::{beam_ged, DEFAULT_BEAM_WIDTH};
pub use bipartite::{bipartite_cost_matrix, bipartite_ged, Solver};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GedError {
    #[error("graph sizes {n1} and {n2} exceed the exact-search limit {limit}")]
    SizeOverLimit { n1: usize, n2: usize, limit: usize },
    #[error("exact search timed out after {0:?}")]
    Timeout(Duration),
    #[error("invalid mapping: {0}")]
    InvalidMapping(String),
    #[error("GED must be non-negative, got {0}")]
    NegativeGed(f64),
    #[error("node counts must be positive")]
    EmptyGraph,
    #[error("beam width must be at least 1")]
    InvalidWidth,
    #[error("invalid cost model: {0}")]
    InvalidCostModel(String),
    #[error("assignment: {0}")]
    Assignment(String),
}

/// Edit operation costs. Edge substitution is always free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditCostModel {
    pub node_insert: f64,
    pub node_delete: f64,
    /// Cost of substituting nodes with different labels; equal labels are free.
    pub node_substitute: f64,
    pub edge_insert: f64,
    pub edge_delete: f64,
}

impl Default for EditCostModel {
    fn default() -> Self {
        Self::unit()
    }
}

impl EditCostModel {
    pub const fn unit() -> Self {
        Self {
            node_insert: 1.0,
            node_delete: 1.0,
            node_substitute: 1.0,
            edge_insert: 1.0,
            edge_delete: 1.0,
        }
    }

    /// Searches only consider mappings with the maximum number of
    /// substitutions, which is lossless when substituting never costs more
    /// than deleting and re-inserting.
    pub fn validate(&self) -> Result<(), GedError> {
        let all = [
            self.node_insert,
            self.node_delete,
            self.node_substitute,
            self.edge_insert,
            self.edge_delete,
        ];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(GedError::InvalidCostModel("costs must be finite and non-negative".into()));
        }
        if self.node_substitute > self.node_insert + self.node_delete {
            return Err(GedError::InvalidCostModel(
                "node substitution must not exceed deletion plus insertion".into(),
            ));
        }
        Ok(())
    }

    /// The same model seen from the other argument order.
    pub fn swapped(&self) -> Self {
        Self {
            node_insert: self.node_delete,
            node_delete: self.node_insert,
            edge_insert: self.edge_delete,
            edge_delete: self.edge_insert,
            ..*self
        }
    }

    pub fn substitution(&self, a: Option<&str>, b: Option<&str>) -> f64 {
        if a == b {
            0.0
        } else {
            self.node_substitute
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GedMethod {
    ExactAstar,
    Hungarian,
    Vj,
    Beam,
    TrimBound,
}

impl GedMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            GedMethod::ExactAstar => "exact_astar",
            GedMethod::Hungarian => "hungarian",
            GedMethod::Vj => "vj",
            GedMethod::Beam => "beam",
            GedMethod::TrimBound => "trim_bound",
        }
    }
}

impl fmt::Display for GedMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GedMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" | "exact_astar" => Ok(GedMethod::ExactAstar),
            "hungarian" => Ok(GedMethod::Hungarian),
            "vj" => Ok(GedMethod::Vj),
            "beam" => Ok(GedMethod::Beam),
            "trim_bound" => Ok(GedMethod::TrimBound),
            other => Err(format!("unknown GED method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GedResult {
    pub value: f64,
    pub method: GedMethod,
    /// Node correspondence from `g1` to `g2`, oriented as the call's arguments.
    pub mapping: Option<Vec<Option<usize>>>,
}

/// Total edit cost implied by `mapping`.
pub fn edit_path_cost_from_mapping(
    g1: &Graph,
    g2: &Graph,
    mapping: &[Option<usize>],
    cost: &EditCostModel,
) -> Result<f64, GedError> {
    let (n1, n2) = (g1.node_count(), g2.node_count());
    if mapping.len() != n1 {
        return Err(GedError::InvalidMapping(format!(
            "mapping has {} entries for {n1} nodes",
            mapping.len()
        )));
    }
    let mut inverse = vec![None; n2];
    for (i, m) in mapping.iter().enumerate() {
        if let Some(j) = *m {
            if j >= n2 {
                return Err(GedError::InvalidMapping(format!("target {j} out of range")));
            }
            if let Some(prev) = inverse[j].replace(i) {
                return Err(GedError::InvalidMapping(format!(
                    "nodes {prev} and {i} both map to {j}"
                )));
            }
        }
    }
    let mut total = 0.0;
    for (i, m) in mapping.iter().enumerate() {
        total += match m {
            Some(j) => cost.substitution(g1.label(i), g2.label(*j)),
            None => cost.node_delete,
        };
    }
    total += inverse.iter().filter(|p| p.is_none()).count() as f64 * cost.node_insert;
    for &(u, v) in g1.edges() {
        let kept = matches!((mapping[u], mapping[v]), (Some(a), Some(b)) if g2.has_edge(a, b));
        if !kept {
            total += cost.edge_delete;
        }
    }
    for &(a, b) in g2.edges() {
        let kept = matches!((inverse[a], inverse[b]), (Some(u), Some(v)) if g1.has_edge(u, v));
        if !kept {
            total += cost.edge_insert;
        }
    }
    Ok(total)
}

/// Inverts a `g2 -> g1` mapping into `g1 -> g2` orientation.
pub(crate) fn invert_mapping(mapping: &[Option<usize>], n1: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; n1];
    for (j, m) in mapping.iter().enumerate() {
        if let Some(i) = *m {
            out[i] = Some(j);
        }
    }
    out
}

/// `nged = ged / ((n1 + n2) / 2)` and `sim = exp(-nged)`.
pub fn nged_similarity(ged: f64, n1: usize, n2: usize) -> Result<(f64, f64), GedError> {
    if ged.is_nan() || ged < 0.0 {
        return Err(GedError::NegativeGed(ged));
    }
    if n1 == 0 || n2 == 0 {
        return Err(GedError::EmptyGraph);
    }
    let nged = ged / ((n1 + n2) as f64 / 2.0);
    Ok((nged, (-nged).exp()))
}

#[cfg(test)]
mod tests;
