//! Undirected simple graphs, JSON (de)serialization and induced subgraphs.
//!
//! The on-disk format is a single JSON object:
//!
//! ```text
//! {"id": "g0", "n": 3, "edges": [[0,1],[1,2]], "labels": {"0": "C"}}
//! ```
//!
//! `id` and `labels` are optional on input. Edges are written with `u < v`
//! in ascending order, so saving a loaded graph is canonical.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("malformed graph document at line {line}, column {column}: {message}")]
    Malformed {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("graph must have at least one node")]
    Empty,
    #[error("edge #{index}: self-loop on node {node}")]
    SelfLoop { index: usize, node: usize },
    #[error("edge #{index}: duplicate edge ({u}, {v})")]
    DuplicateEdge { index: usize, u: usize, v: usize },
    #[error("edge #{index}: node id {node} out of range for n = {n}")]
    NodeOutOfRange { index: usize, node: usize, n: usize },
    #[error("label for node {node} out of range for n = {n}")]
    LabelOutOfRange { node: usize, n: usize },
    #[error("node set is empty")]
    EmptyNodeSet,
    #[error("node {node} out of range for n = {n}")]
    InvalidNode { node: usize, n: usize },
    #[error("feature dimension must be at least 1")]
    InvalidDimension,
}

/// Undirected, unweighted simple graph on node ids `0..n`.
#[derive(Debug, Clone)]
pub struct Graph {
    id: String,
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
    labels: BTreeMap<usize, String>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges && self.labels == other.labels
    }
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    #[serde(default)]
    id: String,
    n: usize,
    edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    labels: BTreeMap<usize, String>,
}

impl Graph {
    /// Builds and validates a graph. Edge endpoints may come in either order.
    pub fn new(
        id: impl Into<String>,
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        labels: BTreeMap<usize, String>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut seen = BTreeSet::new();
        for (index, (a, b)) in edges.into_iter().enumerate() {
            for node in [a, b] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { index, node, n });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop { index, node: a });
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(GraphError::DuplicateEdge {
                    index,
                    u: e.0,
                    v: e.1,
                });
            }
        }
        if let Some((&node, _)) = labels.range(n..).next() {
            return Err(GraphError::LabelOutOfRange { node, n });
        }
        let edges: Vec<_> = seen.into_iter().collect();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Self {
            id: id.into(),
            n,
            edges,
            adj,
            labels,
        })
    }

    /// Unlabeled graph with an empty id.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        Self::new("", n, edges.iter().copied(), BTreeMap::new())
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        Self::from_edges(n, &edges).expect("path graph is valid")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least three nodes");
        let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        Self::from_edges(n, &edges).expect("cycle graph is valid")
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        Self::from_edges(n, &edges).expect("complete graph is valid")
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adj[u].binary_search(&v).is_ok()
    }

    pub fn label(&self, v: usize) -> Option<&str> {
        self.labels.get(&v).map(String::as_str)
    }

    pub fn labels(&self) -> &BTreeMap<usize, String> {
        &self.labels
    }

    /// True iff every node is reachable from node 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &w in &self.adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n
    }

    /// Subgraph induced by `nodes`, relabeled `0..|nodes|` in ascending order
    /// of the original ids.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<(Graph, IdMap), GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::EmptyNodeSet);
        }
        let mut old_of_new: Vec<usize> = nodes.to_vec();
        old_of_new.sort_unstable();
        old_of_new.dedup();
        if let Some(&node) = old_of_new.iter().find(|&&v| v >= self.n) {
            return Err(GraphError::InvalidNode { node, n: self.n });
        }
        let map = IdMap { old_of_new };
        let mut edges = Vec::new();
        for (new_u, &old_u) in map.old_of_new.iter().enumerate() {
            for &old_v in &self.adj[old_u] {
                if old_v > old_u {
                    if let Some(new_v) = map.new_of(old_v) {
                        edges.push((new_u, new_v));
                    }
                }
            }
        }
        let labels = map
            .old_of_new
            .iter()
            .enumerate()
            .filter_map(|(new, old)| self.labels.get(old).map(|l| (new, l.clone())))
            .collect();
        let sub = Graph::new(
            format!("{}[{}]", self.id, map.old_of_new.len()),
            map.len(),
            edges,
            labels,
        )?;
        Ok((sub, map))
    }

    /// Copy of the graph with node `v` renamed to `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph, GraphError> {
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v]));
        let labels = self
            .labels
            .iter()
            .map(|(&v, l)| (perm[v], l.clone()))
            .collect();
        Graph::new(self.id.clone(), self.n, edges, labels)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, GraphError> {
        let doc: GraphDoc = serde_json::from_slice(bytes).map_err(|e| GraphError::Malformed {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Graph::new(doc.id, doc.n, doc.edges, doc.labels)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let doc = GraphDoc {
            id: self.id.clone(),
            n: self.n,
            edges: self.edges.clone(),
            labels: self.labels.clone(),
        };
        serde_json::to_vec(&doc).expect("graph document serializes")
    }
}

/// Bijection between a subgraph's node ids and the parent graph's ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdMap {
    old_of_new: Vec<usize>,
}

impl IdMap {
    pub fn old_of(&self, new: usize) -> usize {
        self.old_of_new[new]
    }

    pub fn new_of(&self, old: usize) -> Option<usize> {
        self.old_of_new.binary_search(&old).ok()
    }

    pub fn old_ids(&self) -> &[usize] {
        &self.old_of_new
    }

    pub fn len(&self) -> usize {
        self.old_of_new.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_of_new.is_empty()
    }
}

/// Per-node feature matrix, one row per node.
pub type NodeFeatures = Tensor;

/// `n x dim` matrix filled with `value`; the initial encoding for unlabeled nodes.
pub fn constant_features(g: &Graph, value: f64, dim: usize) -> Result<NodeFeatures, GraphError> {
    if dim < 1 {
        return Err(GraphError::InvalidDimension);
    }
    Ok(Tensor::full(g.node_count(), dim, value))
}

pub fn load_graph(bytes: &[u8]) -> Result<Graph, GraphError> {
    Graph::from_json(bytes)
}

pub fn save_graph(g: &Graph) -> Vec<u8> {
    g.to_json()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_path() {
        let g = load_graph(br#"{"n":3,"edges":[[0,1],[1,2]]}"#).unwrap();
        assert_eq!(g, Graph::path(3));
        assert_eq!(g.degree(1), 2);
    }

    #[test]
    fn loads_single_node() {
        let g = load_graph(br#"{"n":1,"edges":[]}"#).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
        assert!(g.is_connected());
    }

    #[test]
    fn rejects_invalid_documents() {
        assert_eq!(
            load_graph(br#"{"n":2,"edges":[[0,0]]}"#),
            Err(GraphError::SelfLoop { index: 0, node: 0 })
        );
        assert_eq!(
            load_graph(br#"{"n":3,"edges":[[0,1],[1,0]]}"#),
            Err(GraphError::DuplicateEdge {
                index: 1,
                u: 0,
                v: 1
            })
        );
        assert_eq!(
            load_graph(br#"{"n":2,"edges":[[0,2]]}"#),
            Err(GraphError::NodeOutOfRange {
                index: 0,
                node: 2,
                n: 2
            })
        );
        assert!(matches!(
            load_graph(br#"{"n":2,"edges":[[0,1]"#),
            Err(GraphError::Malformed { line: 1, .. })
        ));
        assert_eq!(
            load_graph(br#"{"n":2,"edges":[],"labels":{"5":"C"}}"#),
            Err(GraphError::LabelOutOfRange { node: 5, n: 2 })
        );
    }

    #[test]
    fn save_is_canonical() {
        let g = Graph::from_edges(3, &[(2, 1), (1, 0)]).unwrap().with_id("p3");
        assert_eq!(
            String::from_utf8(save_graph(&g)).unwrap(),
            r#"{"id":"p3","n":3,"edges":[[0,1],[1,2]]}"#
        );
    }

    #[test]
    fn round_trips_labels_and_isolated_nodes() {
        let labels = BTreeMap::from([(0, "C".to_string()), (1, "N".to_string())]);
        let g = Graph::new("m", 2, [(0, 1)], labels).unwrap();
        let back = load_graph(&save_graph(&g)).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.label(1), Some("N"));

        let empty = Graph::from_edges(5, &[]).unwrap();
        let back = load_graph(&save_graph(&empty)).unwrap();
        assert_eq!(back.node_count(), 5);
        assert_eq!(back.edge_count(), 0);
    }

    #[test]
    fn connectivity() {
        assert!(Graph::path(3).is_connected());
        assert!(!Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap().is_connected());
    }

    #[test]
    fn induced_subgraphs() {
        let (sub, map) = Graph::path(3).induced_subgraph(&[0, 1]).unwrap();
        assert_eq!(sub, Graph::path(2));
        assert_eq!(map.old_ids(), &[0, 1]);

        let tri = Graph::complete(3);
        let (sub, _) = tri.induced_subgraph(&[2, 1, 0]).unwrap();
        assert_eq!(sub, tri);

        let (sub, map) = tri.induced_subgraph(&[0, 2]).unwrap();
        assert_eq!(sub.edges(), &[(0, 1)]);
        assert_eq!(map.old_of(1), 2);
        assert_eq!(map.new_of(2), Some(1));
        assert_eq!(map.new_of(1), None);

        assert_eq!(tri.induced_subgraph(&[]), Err(GraphError::EmptyNodeSet));
    }

    #[test]
    fn constant_feature_matrices() {
        let f = constant_features(&Graph::path(3), 1.0, 4).unwrap();
        assert_eq!(f.shape(), [3, 4]);
        assert!(f.data().iter().all(|&x| x == 1.0));
        let f = constant_features(&Graph::path(1), 0.5, 2).unwrap();
        assert_eq!(f.data(), &[0.5, 0.5]);
        assert_eq!(
            constant_features(&Graph::path(3), 1.0, 0),
            Err(GraphError::InvalidDimension)
        );
    }
}
