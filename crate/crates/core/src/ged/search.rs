//! Search space shared by the A* and beam solvers.
//!
//! `g1` nodes are decided one at a time in a fixed order (high degree
//! first). Each step substitutes the next node with an unused `g2` node or
//! deletes it; after the last step every unused `g2` node is inserted.
//! Exactly `max(0, n1 - n2)` deletions are allowed, so every complete path
//! performs `min(n1, n2)` substitutions.

use std::collections::HashMap;

use super::EditCostModel;
use crate::graph::Graph;

pub(crate) struct SearchContext<'a> {
    g1: &'a Graph,
    g2: &'a Graph,
    cost: EditCostModel,
    pub n1: usize,
    pub n2: usize,
    order: Vec<usize>,
    pos: Vec<usize>,
    adj1: Vec<bool>,
    adj2: Vec<bool>,
    label1: Vec<usize>,
    label2: Vec<usize>,
    n_labels: usize,
    /// Label histogram of `order[d..]`, flattened `(n1 + 1) x n_labels`.
    suffix_labels: Vec<u32>,
    /// `g1` edges with at least one endpoint in `order[d..]`.
    e1_remaining: Vec<usize>,
    e2_total: usize,
    max_deletions: usize,
}

/// A partial mapping with everything needed to expand it.
#[derive(Clone, Debug)]
pub(crate) struct Partial {
    pub depth: usize,
    pub g: f64,
    pub deletions: usize,
    /// `g2` edges with both endpoints already used.
    pub both_used: usize,
    img: Vec<Option<usize>>,
    inv: Vec<Option<usize>>,
    unused_labels: Vec<u32>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Child {
    pub target: Option<usize>,
    pub g: f64,
    pub h: f64,
    pub deletions: usize,
    pub both_used: usize,
    /// Tie-break key: degree difference, then whether the ids differ.
    pub affinity: (usize, bool),
}

impl Child {
    pub fn f(&self) -> f64 {
        self.g + self.h
    }
}

impl<'a> SearchContext<'a> {
    pub fn new(g1: &'a Graph, g2: &'a Graph, cost: EditCostModel) -> Self {
        let (n1, n2) = (g1.node_count(), g2.node_count());
        let mut order: Vec<usize> = (0..n1).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(g1.degree(v)), v));
        let mut pos = vec![0; n1];
        for (d, &v) in order.iter().enumerate() {
            pos[v] = d;
        }
        let dense = |g: &Graph| {
            let n = g.node_count();
            let mut a = vec![false; n * n];
            for &(u, v) in g.edges() {
                a[u * n + v] = true;
                a[v * n + u] = true;
            }
            a
        };

        let mut ids: HashMap<Option<&str>, usize> = HashMap::new();
        let mut intern = |l: Option<&'a str>| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        };
        let label1: Vec<usize> = (0..n1).map(|v| intern(g1.label(v))).collect();
        let label2: Vec<usize> = (0..n2).map(|v| intern(g2.label(v))).collect();
        let n_labels = ids.len();

        let mut suffix_labels = vec![0u32; (n1 + 1) * n_labels];
        for d in (0..n1).rev() {
            let (head, tail) = suffix_labels.split_at_mut((d + 1) * n_labels);
            head[d * n_labels..].copy_from_slice(&tail[..n_labels]);
            head[d * n_labels + label1[order[d]]] += 1;
        }
        let mut e1_remaining = vec![0; n1 + 1];
        for &(u, v) in g1.edges() {
            // the edge stays undecided until its later endpoint is placed
            let last = pos[u].max(pos[v]);
            for slot in &mut e1_remaining[..=last] {
                *slot += 1;
            }
        }

        Self {
            g1,
            g2,
            cost,
            n1,
            n2,
            order,
            pos,
            adj1: dense(g1),
            adj2: dense(g2),
            label1,
            label2,
            n_labels,
            suffix_labels,
            e1_remaining,
            e2_total: g2.edge_count(),
            max_deletions: n1.saturating_sub(n2),
        }
    }

    pub fn root(&self) -> Partial {
        let mut unused_labels = vec![0u32; self.n_labels];
        for &l in &self.label2 {
            unused_labels[l] += 1;
        }
        Partial {
            depth: 0,
            g: 0.0,
            deletions: 0,
            both_used: 0,
            img: vec![None; self.n1],
            inv: vec![None; self.n2],
            unused_labels,
        }
    }

    /// Rebuilds a partial mapping from its decision sequence.
    pub fn replay(&self, targets: &[Option<usize>], g: f64, deletions: usize, both_used: usize) -> Partial {
        let mut p = self.root();
        for &t in targets {
            self.place(&mut p, t);
        }
        p.g = g;
        p.deletions = deletions;
        p.both_used = both_used;
        p
    }

    fn place(&self, p: &mut Partial, target: Option<usize>) {
        let u = self.order[p.depth];
        p.img[u] = target;
        if let Some(t) = target {
            p.inv[t] = Some(u);
            p.unused_labels[self.label2[t]] -= 1;
        }
        p.depth += 1;
    }

    pub fn apply(&self, parent: &Partial, child: &Child) -> Partial {
        let mut p = parent.clone();
        self.place(&mut p, child.target);
        p.g = child.g;
        p.deletions = child.deletions;
        p.both_used = child.both_used;
        p
    }

    pub fn is_complete(&self, p: &Partial) -> bool {
        p.depth == self.n1
    }

    pub fn mapping(&self, p: &Partial) -> Vec<Option<usize>> {
        p.img.clone()
    }

    /// Appends every feasible expansion of `p` to `out`.
    pub fn children(&self, p: &Partial, out: &mut Vec<Child>) {
        let d = p.depth;
        debug_assert!(d < self.n1);
        let u = self.order[d];
        let c = &self.cost;

        // edges from u back to already placed g1 nodes
        let placed_neighbors = self.g1.neighbors(u).iter().filter(|&&w| self.pos[w] < d);

        if p.deletions < self.max_deletions {
            let removed = placed_neighbors.clone().count() as f64 * c.edge_delete;
            let g = p.g + c.node_delete + removed;
            let mut child = self.finish_child(p, None, g, p.deletions + 1, p.both_used);
            child.affinity = (self.g1.degree(u), true);
            out.push(child);
        }
        for t in 0..self.n2 {
            if p.inv[t].is_some() {
                continue;
            }
            let mut g = p.g;
            if self.label1[u] != self.label2[t] {
                g += c.node_substitute;
            }
            let row2 = &self.adj2[t * self.n2..(t + 1) * self.n2];
            for &w in placed_neighbors.clone() {
                match p.img[w] {
                    Some(tw) if row2[tw] => {}
                    _ => g += c.edge_delete,
                }
            }
            let mut both_used = p.both_used;
            let row1 = &self.adj1[u * self.n1..(u + 1) * self.n1];
            for &x in self.g2.neighbors(t) {
                if let Some(w) = p.inv[x] {
                    both_used += 1;
                    if !row1[w] {
                        g += c.edge_insert;
                    }
                }
            }
            let mut child = self.finish_child(p, Some(t), g, p.deletions, both_used);
            child.affinity = (self.g1.degree(u).abs_diff(self.g2.degree(t)), t != u);
            out.push(child);
        }
    }

    fn finish_child(&self, p: &Partial, target: Option<usize>, g: f64, deletions: usize, both_used: usize) -> Child {
        let depth = p.depth + 1;
        let used = depth - deletions;
        let r1 = self.n1 - depth;
        let r2 = self.n2 - used;
        let rem_del = self.max_deletions - deletions;
        let subs = r1 - rem_del;
        let ins = r2 - subs;
        let c = &self.cost;

        let mismatched = if c.node_substitute == 0.0 || self.n_labels == 1 {
            0
        } else {
            let suffix = &self.suffix_labels[depth * self.n_labels..(depth + 1) * self.n_labels];
            let target_label = target.map(|t| self.label2[t]);
            let overlap: usize = (0..self.n_labels)
                .map(|l| {
                    let unused = p.unused_labels[l] - u32::from(target_label == Some(l));
                    suffix[l].min(unused) as usize
                })
                .sum();
            subs.saturating_sub(overlap)
        };
        let e1r = self.e1_remaining[depth];
        let e2r = self.e2_total - both_used;
        let edge_bound = if e1r >= e2r {
            (e1r - e2r) as f64 * c.edge_delete
        } else {
            (e2r - e1r) as f64 * c.edge_insert
        };
        let h = rem_del as f64 * c.node_delete
            + ins as f64 * c.node_insert
            + mismatched as f64 * c.node_substitute
            + edge_bound;
        Child {
            target,
            g,
            h,
            deletions,
            both_used,
            affinity: (0, false),
        }
    }
}
