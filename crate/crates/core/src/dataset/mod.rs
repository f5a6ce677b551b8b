//! Synthetic BA datasets with trimming-based ground truth.
//!
//! Each basic graph spawns derived graphs by random edits with bookkept
//! cost. Every ordered pair of graphs gets a ground-truth GED: the minimum
//! over the Hungarian, VJ and beam upper bounds, the bookkept trim cost
//! where the pair shares a root, and an exact value for tiny graphs.

mod generate;
mod io;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ged::{
    beam_ged, bipartite_ged, exact_ged_astar, nged_similarity, AstarOptions, EditCostModel, GedError, Solver,
    DEFAULT_BEAM_WIDTH,
};
use crate::graph::{Graph, GraphError};

pub use generate::{generate_ba, trim, TrimOpKind, TRIM_ATTEMPTS};
pub use io::{load_manifest, save_manifest, write_atomic, MANIFEST_FORMAT};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("could not trim {graph:?} by {target} after {TRIM_ATTEMPTS} attempts")]
    TrimInfeasible { graph: String, target: u32 },
    #[error("GED is not integral: {0}")]
    NonIntegralGed(f64),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Ged(#[from] GedError),
}

/// A graph of the dataset together with its trimming history.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedGraph {
    pub graph: Graph,
    /// Id of the basic graph it was derived from (its own id for a basic graph).
    pub root_id: String,
    /// Bookkept edit cost from the root; 0 for a basic graph.
    pub trim_ged: u32,
    /// Seed for this graph's cached partition.
    pub partition_seed: u64,
}

impl DerivedGraph {
    pub fn id(&self) -> &str {
        self.graph.id()
    }

    pub fn is_basic(&self) -> bool {
        self.root_id == self.graph.id()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Trim,
    TrimTriangle,
    Hungarian,
    Vj,
    Beam,
    Exact,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Trim => "trim",
            Provenance::TrimTriangle => "trim_triangle",
            Provenance::Hungarian => "hungarian",
            Provenance::Vj => "vj",
            Provenance::Beam => "beam",
            Provenance::Exact => "exact",
        }
    }

    /// Preference among equal candidates: lower wins.
    fn priority(self) -> u8 {
        match self {
            Provenance::Exact => 0,
            Provenance::Trim => 1,
            Provenance::TrimTriangle => 2,
            Provenance::Hungarian => 3,
            Provenance::Vj => 4,
            Provenance::Beam => 5,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trim" => Ok(Provenance::Trim),
            "trim_triangle" => Ok(Provenance::TrimTriangle),
            "hungarian" => Ok(Provenance::Hungarian),
            "vj" => Ok(Provenance::Vj),
            "beam" => Ok(Provenance::Beam),
            "exact" => Ok(Provenance::Exact),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id1: String,
    pub id2: String,
    pub ged: u32,
    pub nged: f64,
    pub sim: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Splits {
    /// Ranking database for test queries: train and validation graphs.
    pub fn database(&self) -> Vec<String> {
        self.train.iter().chain(&self.val).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub graphs: Vec<DerivedGraph>,
    /// Sorted by `(id1, id2)`.
    pub pairs: Vec<PairRecord>,
    pub splits: Option<Splits>,
}

impl DatasetManifest {
    pub fn graph(&self, id: &str) -> Option<&DerivedGraph> {
        self.graphs.iter().find(|g| g.id() == id)
    }

    pub fn pair(&self, id1: &str, id2: &str) -> Option<&PairRecord> {
        self.pairs
            .binary_search_by(|p| (p.id1.as_str(), p.id2.as_str()).cmp(&(id1, id2)))
            .ok()
            .map(|i| &self.pairs[i])
    }

    /// Records for every `(a, b)` with `a` in `left`, `b` in `right`, in input order.
    pub fn pairs_between(&self, left: &[String], right: &[String]) -> Result<Vec<&PairRecord>, DatasetError> {
        let mut out = Vec::with_capacity(left.len() * right.len());
        for a in left {
            for b in right {
                out.push(
                    self.pair(a, b)
                        .ok_or_else(|| DatasetError::Invalid(format!("missing pair ({a}, {b})")))?,
                );
            }
        }
        Ok(out)
    }

    pub fn splits(&self) -> Result<&Splits, DatasetError> {
        self.splits
            .as_ref()
            .ok_or_else(|| DatasetError::Invalid("dataset has no train/val/test split".into()))
    }

    /// Training pairs: train x train.
    pub fn train_pairs(&self) -> Result<Vec<&PairRecord>, DatasetError> {
        let s = self.splits()?;
        self.pairs_between(&s.train, &s.train)
    }

    /// Validation pairs: val x (train + val).
    pub fn val_pairs(&self) -> Result<Vec<&PairRecord>, DatasetError> {
        let s = self.splits()?;
        self.pairs_between(&s.val, &s.database())
    }

    /// Test pairs: test x (train + val).
    pub fn test_pairs(&self) -> Result<Vec<&PairRecord>, DatasetError> {
        let s = self.splits()?;
        self.pairs_between(&s.test, &s.database())
    }

    /// Checks ids, pair coverage, record consistency and split validity.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut ids: Vec<&str> = self.graphs.iter().map(|g| g.id()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(DatasetError::Invalid("duplicate graph id".into()));
        }
        if self.pairs.len() != ids.len() * ids.len() {
            return Err(DatasetError::Invalid(format!(
                "{} pair records for {} graphs",
                self.pairs.len(),
                ids.len()
            )));
        }
        let expected = ids.iter().flat_map(|a| ids.iter().map(move |b| (*a, *b)));
        for (p, (a, b)) in self.pairs.iter().zip(expected) {
            if (p.id1.as_str(), p.id2.as_str()) != (a, b) {
                return Err(DatasetError::Invalid(format!("unexpected pair ({}, {})", p.id1, p.id2)));
            }
            if !(p.sim > 0.0 && p.sim <= 1.0) || (p.ged == 0) != (p.sim == 1.0) {
                return Err(DatasetError::Invalid(format!("bad similarity for ({a}, {b})")));
            }
        }
        if let Some(s) = &self.splits {
            let mut all: Vec<&str> = s.train.iter().chain(&s.val).chain(&s.test).map(String::as_str).collect();
            all.sort_unstable();
            if all != ids {
                return Err(DatasetError::Invalid("splits are not a partition of the graph ids".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthOptions {
    pub beam_width: usize,
    /// Pairs whose graphs both have at most this many nodes also get an exact value.
    pub exact_node_limit: usize,
}

impl Default for GroundTruthOptions {
    fn default() -> Self {
        Self {
            beam_width: DEFAULT_BEAM_WIDTH,
            exact_node_limit: 7,
        }
    }
}

/// All candidate GED values for a pair, in a fixed order.
pub fn ged_candidates(
    g1: &DerivedGraph,
    g2: &DerivedGraph,
    options: &GroundTruthOptions,
) -> Result<Vec<(Provenance, u32)>, DatasetError> {
    let unit = EditCostModel::unit();
    let (a, b) = (&g1.graph, &g2.graph);
    let mut out = Vec::with_capacity(6);
    if g1.id() == g2.id() {
        out.push((Provenance::Exact, 0));
        return Ok(out);
    }
    if a.node_count().max(b.node_count()) <= options.exact_node_limit {
        let opts = AstarOptions {
            node_limit: options.exact_node_limit,
            timeout: None,
        };
        out.push((Provenance::Exact, integral(exact_ged_astar(a, b, &unit, opts)?.value)?));
    }
    if g1.root_id == g2.id() {
        out.push((Provenance::Trim, g1.trim_ged));
    } else if g2.root_id == g1.id() {
        out.push((Provenance::Trim, g2.trim_ged));
    } else if g1.root_id == g2.root_id {
        out.push((Provenance::TrimTriangle, g1.trim_ged + g2.trim_ged));
    }
    out.push((Provenance::Hungarian, integral(bipartite_ged(a, b, &unit, Solver::Hungarian)?.value)?));
    out.push((Provenance::Vj, integral(bipartite_ged(a, b, &unit, Solver::Vj)?.value)?));
    out.push((Provenance::Beam, integral(beam_ged(a, b, &unit, options.beam_width)?.value)?));
    Ok(out)
}

fn integral(v: f64) -> Result<u32, DatasetError> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(DatasetError::NonIntegralGed(v))
    }
}

/// The minimum candidate; ties go to the most direct evidence.
pub fn select_minimum(candidates: &[(Provenance, u32)]) -> (Provenance, u32) {
    *candidates
        .iter()
        .min_by(|x, y| x.1.cmp(&y.1).then(x.0.priority().cmp(&y.0.priority())))
        .expect("at least one candidate")
}

/// Ground-truth record for an ordered pair.
pub fn ground_truth(
    g1: &DerivedGraph,
    g2: &DerivedGraph,
    options: &GroundTruthOptions,
) -> Result<PairRecord, DatasetError> {
    let (provenance, ged) = select_minimum(&ged_candidates(g1, g2, options)?);
    record(g1, g2, ged, provenance)
}

fn record(g1: &DerivedGraph, g2: &DerivedGraph, ged: u32, provenance: Provenance) -> Result<PairRecord, DatasetError> {
    let (nged, sim) = nged_similarity(ged as f64, g1.graph.node_count(), g2.graph.node_count())?;
    Ok(PairRecord {
        id1: g1.id().to_string(),
        id2: g2.id().to_string(),
        ged,
        nged,
        sim,
        provenance,
    })
}

/// Ground truth for every ordered pair, sorted by `(id1, id2)`.
///
/// Each unordered pair is solved once (in parallel) and mirrored; all
/// candidate solvers are symmetric in their arguments.
pub fn all_pairs(graphs: &[DerivedGraph], options: &GroundTruthOptions) -> Result<Vec<PairRecord>, DatasetError> {
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    order.sort_by(|&a, &b| graphs[a].id().cmp(graphs[b].id()));
    let unordered: Vec<(usize, usize)> = (0..order.len())
        .flat_map(|i| (i..order.len()).map(move |j| (i, j)))
        .collect();
    let solved: Vec<(Provenance, u32)> = unordered
        .par_iter()
        .map(|&(i, j)| {
            let c = ged_candidates(&graphs[order[i]], &graphs[order[j]], options)?;
            Ok(select_minimum(&c))
        })
        .collect::<Result<_, DatasetError>>()?;

    let n = order.len();
    let mut table = vec![None; n * n];
    for (&(i, j), &(p, ged)) in unordered.iter().zip(&solved) {
        table[i * n + j] = Some((p, ged));
        table[j * n + i] = Some((p, ged));
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (p, ged) = table[i * n + j].expect("every pair solved");
            out.push(record(&graphs[order[i]], &graphs[order[j]], ged, p)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    /// Node count of each basic graph.
    pub n: usize,
    /// BA attachment count.
    pub ba_m: usize,
    pub basics: usize,
    pub trims_per_basic: usize,
    /// Trim targets cycle through `1..=max_trim_ged`.
    pub max_trim_ged: u32,
    pub seed: u64,
    pub ground_truth: GroundTruthOptions,
    pub split_ratios: (f64, f64, f64),
}

impl DatasetConfig {
    pub fn ba(n: usize, seed: u64) -> Self {
        Self {
            n,
            ba_m: 1,
            basics: 2,
            trims_per_basic: 99,
            max_trim_ged: 10,
            seed,
            ground_truth: GroundTruthOptions::default(),
            split_ratios: DEFAULT_SPLIT,
        }
    }
}

pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.6, 0.2, 0.2);

/// Generates the graphs of a dataset (no pair records).
pub fn generate_graphs(config: &DatasetConfig) -> Result<Vec<DerivedGraph>, DatasetError> {
    if config.max_trim_ged == 0 || config.basics == 0 {
        return Err(DatasetError::InvalidParameters(
            "need at least one basic graph and a positive trim range".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let width = config.trims_per_basic.saturating_sub(1).to_string().len().max(2);
    let mut graphs = Vec::with_capacity(config.basics * (config.trims_per_basic + 1));
    for b in 0..config.basics {
        let root_id = format!("ba{}-{b}", config.n);
        let basic = generate_ba(config.n, config.ba_m, rng.gen())?.with_id(&root_id);
        graphs.push(DerivedGraph {
            graph: basic.clone(),
            root_id: root_id.clone(),
            trim_ged: 0,
            partition_seed: rng.gen(),
        });
        for t in 0..config.trims_per_basic {
            let target = (t as u32 % config.max_trim_ged) + 1;
            let (g, _) = trim(&basic, target, rng.gen())?;
            graphs.push(DerivedGraph {
                graph: g.with_id(format!("{root_id}-t{t:0width$}")),
                root_id: root_id.clone(),
                trim_ged: target,
                partition_seed: rng.gen(),
            });
        }
    }
    Ok(graphs)
}

/// Full BA dataset: graphs, ground truth for all ordered pairs, and a split.
pub fn build_ba_dataset(config: &DatasetConfig) -> Result<DatasetManifest, DatasetError> {
    let graphs = generate_graphs(config)?;
    log::info!("generated {} graphs; computing ground truth", graphs.len());
    let pairs = all_pairs(&graphs, &config.ground_truth)?;
    let mut manifest = DatasetManifest {
        name: format!("ba{}", config.n),
        graphs,
        pairs,
        splits: None,
    };
    manifest.splits = Some(split_dataset(&manifest, config.split_ratios, config.seed)?);
    Ok(manifest)
}

/// Random graph-level split with counts `round(r_train n)`, `round(r_val n)` and the rest.
pub fn split_dataset(
    manifest: &DatasetManifest,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<Splits, DatasetError> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !(0.0..=1.0).contains(r)) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(DatasetError::InvalidParameters(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let mut ids: Vec<String> = manifest.graphs.iter().map(|g| g.id().to_string()).collect();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = ids.len();
    let n_train = ((a * n as f64).round() as usize).min(n);
    let n_val = ((b * n as f64).round() as usize).min(n - n_train);
    let test = ids.split_off(n_train + n_val);
    let val = ids.split_off(n_train);
    Ok(Splits { train: ids, val, test })
}

#[cfg(test)]
mod tests;
