use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::search::{Child, SearchContext};
use super::{EditCostModel, GedError, GedMethod, GedResult};
use crate::graph::Graph;

pub const DEFAULT_NODE_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AstarOptions {
    /// Largest accepted node count for either graph.
    pub node_limit: usize,
    pub timeout: Option<Duration>,
}

impl Default for AstarOptions {
    fn default() -> Self {
        Self {
            node_limit: DEFAULT_NODE_LIMIT,
            timeout: None,
        }
    }
}

struct Node {
    parent: usize,
    child: Child,
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    depth: usize,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // max-heap: smallest f first, then deeper, then larger g, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.depth.cmp(&other.depth))
            .then(self.g.total_cmp(&other.g))
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const ROOT: usize = usize::MAX;

/// Exact GED by A* over node mappings with an admissible size/label/edge-count heuristic.
pub fn exact_ged_astar(
    g1: &Graph,
    g2: &Graph,
    cost: &EditCostModel,
    options: AstarOptions,
) -> Result<GedResult, GedError> {
    cost.validate()?;
    let (n1, n2) = (g1.node_count(), g2.node_count());
    if n1.max(n2) > options.node_limit {
        return Err(GedError::SizeOverLimit {
            n1,
            n2,
            limit: options.node_limit,
        });
    }
    let start = Instant::now();
    let ctx = SearchContext::new(g1, g2, *cost);
    let mut arena: Vec<Node> = Vec::new();
    let mut open = BinaryHeap::new();
    let mut children = Vec::new();
    let mut targets = Vec::with_capacity(n1);

    let root = ctx.root();
    ctx.children(&root, &mut children);
    for c in children.drain(..) {
        push(&mut arena, &mut open, ROOT, 1, c);
    }
    while let Some(top) = open.pop() {
        if let Some(limit) = options.timeout {
            if start.elapsed() >= limit {
                return Err(GedError::Timeout(start.elapsed()));
            }
        }
        targets.clear();
        let mut i = top.index;
        while i != ROOT {
            targets.push(arena[i].child.target);
            i = arena[i].parent;
        }
        targets.reverse();
        let node = &arena[top.index];
        let partial = ctx.replay(&targets, node.child.g, node.child.deletions, node.child.both_used);
        if ctx.is_complete(&partial) {
            return Ok(GedResult {
                value: top.f,
                method: GedMethod::ExactAstar,
                mapping: Some(ctx.mapping(&partial)),
            });
        }
        ctx.children(&partial, &mut children);
        for c in children.drain(..) {
            push(&mut arena, &mut open, top.index, partial.depth + 1, c);
        }
    }
    unreachable!("search space always contains a complete mapping")
}

fn push(arena: &mut Vec<Node>, open: &mut BinaryHeap<Open>, parent: usize, depth: usize, child: Child) {
    let index = arena.len();
    open.push(Open {
        f: child.f(),
        g: child.g,
        depth,
        index,
    });
    arena.push(Node { parent, child });
}
