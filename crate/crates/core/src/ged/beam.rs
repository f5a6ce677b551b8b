use std::cmp::Ordering;

use super::search::{Child, Partial, SearchContext};
use super::{edit_path_cost_from_mapping, invert_mapping, EditCostModel, GedError, GedMethod, GedResult};
use crate::graph::Graph;

pub const DEFAULT_BEAM_WIDTH: usize = 100;

/// Beam-search GED, run in both argument orders; the smaller value wins.
///
/// Each level keeps the `width` children with the lowest `g + h`. Ties prefer
/// larger `g`, then similar degrees, then equal node ids. A width at least as large as the full frontier makes
/// the search exhaustive.
pub fn beam_ged(g1: &Graph, g2: &Graph, cost: &EditCostModel, width: usize) -> Result<GedResult, GedError> {
    if width == 0 {
        return Err(GedError::InvalidWidth);
    }
    cost.validate()?;
    let (forward_value, forward) = beam_one_way(g1, g2, cost, width);
    let (backward_value, backward) = beam_one_way(g2, g1, &cost.swapped(), width);
    let mapping = if backward_value < forward_value {
        invert_mapping(&backward, g1.node_count())
    } else {
        forward
    };
    let value = edit_path_cost_from_mapping(g1, g2, &mapping, cost)?;
    Ok(GedResult {
        value,
        method: GedMethod::Beam,
        mapping: Some(mapping),
    })
}

fn beam_one_way(g1: &Graph, g2: &Graph, cost: &EditCostModel, width: usize) -> (f64, Vec<Option<usize>>) {
    let ctx = SearchContext::new(g1, g2, *cost);
    let mut level: Vec<Partial> = vec![ctx.root()];
    let mut candidates: Vec<(usize, Child)> = Vec::new();
    let mut scratch = Vec::new();
    for _ in 0..ctx.n1 {
        candidates.clear();
        for (pi, p) in level.iter().enumerate() {
            ctx.children(p, &mut scratch);
            candidates.extend(scratch.drain(..).map(|c| (pi, c)));
        }
        if candidates.len() > width {
            candidates.select_nth_unstable_by(width - 1, rank);
            candidates.truncate(width);
        }
        candidates.sort_unstable_by(rank);
        level = candidates.iter().map(|(pi, c)| ctx.apply(&level[*pi], c)).collect();
    }
    // leaves are sorted by f, which includes their exact completion cost
    let best = level.first().expect("beam keeps at least one state");
    let mapping = ctx.mapping(best);
    let value = edit_path_cost_from_mapping(g1, g2, &mapping, cost).expect("search mappings are injective");
    (value, mapping)
}

fn rank(a: &(usize, Child), b: &(usize, Child)) -> Ordering {
    a.1.f()
        .total_cmp(&b.1.f())
        .then(b.1.g.total_cmp(&a.1.g))
        .then(a.1.affinity.cmp(&b.1.affinity))
        .then(a.0.cmp(&b.0))
        .then(a.1.target.cmp(&b.1.target))
}
