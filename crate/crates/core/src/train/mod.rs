//! Minibatch training with Adam on the squared similarity error, plus
//! evaluation and timing.
//!
//! Each pair in a batch is differentiated on its own tape, in parallel.
//! Gradients are summed in batch order, so a run is reproducible for any
//! thread count.

pub mod eval;
pub mod metrics;

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{adam_step, AdamState, AutodiffError, Checkpoint, ParamId, Tape, Tensor};
use crate::dataset::{DatasetError, DatasetManifest, PairRecord};
use crate::model::{ModelError, PSimGnn, PreparedGraph};
pub use metrics::MetricError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite value at iteration {iteration} on pair ({id1}, {id2}): {detail}")]
    NonFinite {
        iteration: usize,
        id1: String,
        id2: String,
        detail: String,
    },
    #[error("unknown graph id {0:?}")]
    UnknownGraph(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Minibatch updates.
    pub iterations: usize,
    pub learning_rate: f64,
    /// Validate every this many iterations, and after the last one.
    pub val_every: usize,
    /// Validate on a fixed random subset of this many pairs; all when `None`.
    pub val_subset: Option<usize>,
    pub seed: u64,
    /// Stop once a batch loss falls below this value.
    pub stop_below: Option<f64>,
    /// Standardize the encoder on the training graphs before the first update.
    pub calibrate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            iterations: 2000,
            learning_rate: 0.001,
            val_every: 50,
            val_subset: Some(1024),
            seed: 0,
            stop_below: None,
            calibrate: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.iterations == 0 || self.val_every == 0 || self.val_subset == Some(0) {
            return Err(TrainError::Config("counts must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Partitioned graphs of a dataset, looked up by id.
#[derive(Debug, Clone)]
pub struct PreparedSet {
    pub graphs: Vec<PreparedGraph>,
    index: HashMap<String, usize>,
}

/// A pair of prepared graphs with its target similarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub a: usize,
    pub b: usize,
    pub target: f64,
}

impl PreparedSet {
    /// Partitions every graph with the model's `k` and the manifest's per-graph seed.
    pub fn new(model: &PSimGnn, manifest: &DatasetManifest) -> Result<Self> {
        let graphs = manifest
            .graphs
            .par_iter()
            .map(|g| model.prepare(&g.graph, g.partition_seed))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let index = graphs.iter().enumerate().map(|(i, g)| (g.id.clone(), i)).collect();
        Ok(Self { graphs, index })
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| TrainError::UnknownGraph(id.to_string()))
    }

    pub fn get(&self, id: &str) -> Result<&PreparedGraph> {
        Ok(&self.graphs[self.position(id)?])
    }

    pub fn pairs(&self, records: &[&PairRecord]) -> Result<Vec<ScoredPair>> {
        records
            .iter()
            .map(|r| {
                Ok(ScoredPair {
                    a: self.position(&r.id1)?,
                    b: self.position(&r.id2)?,
                    target: r.sim,
                })
            })
            .collect()
    }

    fn ids(&self, p: &ScoredPair) -> (String, String) {
        (self.graphs[p.a].id.clone(), self.graphs[p.b].id.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub best_iteration: usize,
    pub best_val_loss: f64,
    pub final_val_loss: f64,
    pub history: Vec<HistoryRow>,
}

/// Loss history as `iteration,train_loss,val_loss` CSV.
pub fn history_csv(history: &[HistoryRow]) -> String {
    let mut out = String::from("iteration,train_loss,val_loss\n");
    for r in history {
        let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{}", r.iteration, r.train_loss, val).expect("write to string");
    }
    out
}

/// Predictions for `pairs`, scored in parallel.
pub fn predict_pairs(model: &PSimGnn, set: &PreparedSet, pairs: &[ScoredPair]) -> Result<Vec<f64>> {
    pairs
        .par_iter()
        .map(|p| Ok(model.predict(&set.graphs[p.a], &set.graphs[p.b])?))
        .collect()
}

/// Mean squared error of the model on `pairs`.
pub fn evaluate_loss(model: &PSimGnn, set: &PreparedSet, pairs: &[ScoredPair]) -> Result<f64> {
    let pred = predict_pairs(model, set, pairs)?;
    let truth: Vec<f64> = pairs.iter().map(|p| p.target).collect();
    Ok(metrics::mse_loss(&pred, &truth)?)
}

type PairGrad = (f64, Vec<(ParamId, Vec<f64>)>);

fn pair_gradient(model: &PSimGnn, set: &PreparedSet, p: &ScoredPair, scale: f64) -> std::result::Result<PairGrad, ModelError> {
    let mut t = Tape::new();
    let out = model.forward(&mut t, &set.graphs[p.a], &set.graphs[p.b])?;
    let s = t.scalar(out.score);
    // d/ds of scale * (s - y)^2
    let seed = Tensor::scalar(2.0 * scale * (s - p.target));
    let grads = t.backward_seeded(&[(out.score, seed)])?;
    Ok((s, grads.param_grads().to_vec()))
}

/// Trains `model` in place and leaves it at the best validation checkpoint.
pub fn train(
    model: &mut PSimGnn,
    set: &PreparedSet,
    train_pairs: &[ScoredPair],
    val_pairs: &[ScoredPair],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_pairs.is_empty() || val_pairs.is_empty() {
        return Err(TrainError::Config("training and validation pairs must be nonempty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let val: Vec<ScoredPair> = match config.val_subset {
        Some(n) if n < val_pairs.len() => {
            let mut idx: Vec<usize> = (0..val_pairs.len()).collect();
            idx.shuffle(&mut rng);
            idx.truncate(n);
            idx.sort_unstable();
            idx.into_iter().map(|i| val_pairs[i]).collect()
        }
        _ => val_pairs.to_vec(),
    };
    if config.calibrate {
        let mut used = vec![false; set.graphs.len()];
        for p in train_pairs {
            used[p.a] = true;
            used[p.b] = true;
        }
        let graphs: Vec<&PreparedGraph> = set.graphs.iter().zip(&used).filter(|(_, &u)| u).map(|(g, _)| g).collect();
        model.calibrate_encoder(&graphs)?;
    }
    let batch_size = config.batch_size.min(train_pairs.len());
    let scale = 1.0 / batch_size as f64;
    let mut order: Vec<usize> = (0..train_pairs.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;

    let mut adam = AdamState::new(config.learning_rate);
    let mut history = Vec::with_capacity(config.iterations);
    let mut best: Option<(f64, usize, Checkpoint)> = None;
    let mut final_val_loss = f64::NAN;

    for iteration in 1..=config.iterations {
        if cursor + batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let batch: Vec<ScoredPair> = order[cursor..cursor + batch_size].iter().map(|&i| train_pairs[i]).collect();
        cursor += batch_size;

        let results: Vec<_> = batch
            .par_iter()
            .map(|p| pair_gradient(model, set, p, scale))
            .collect();
        model.store.zero_grad();
        let mut loss = 0.0;
        for (p, r) in batch.iter().zip(results) {
            let (s, grads) = r.map_err(|e| {
                let (id1, id2) = set.ids(p);
                TrainError::NonFinite {
                    iteration,
                    id1,
                    id2,
                    detail: e.to_string(),
                }
            })?;
            loss += (s - p.target) * (s - p.target) * scale;
            for (id, g) in &grads {
                model.store.accumulate_grad(*id, g);
            }
        }
        if !loss.is_finite() {
            let (id1, id2) = set.ids(&batch[0]);
            return Err(TrainError::NonFinite {
                iteration,
                id1,
                id2,
                detail: format!("batch loss {loss}"),
            });
        }
        adam_step(&mut model.store, &mut adam)?;

        let stop = config.stop_below.is_some_and(|t| loss < t);
        let validate = iteration % config.val_every == 0 || iteration == config.iterations || stop;
        let val_loss = if validate {
            let v = evaluate_loss(model, set, &val)?;
            log::info!("iteration {iteration}: train {loss:.6} val {v:.6}");
            if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                best = Some((v, iteration, model.store.checkpoint()));
            }
            final_val_loss = v;
            Some(v)
        } else {
            None
        };
        history.push(HistoryRow {
            iteration,
            train_loss: loss,
            val_loss,
        });
        if stop {
            break;
        }
    }

    let (best_val_loss, best_iteration, ckpt) = best.expect("the last iteration is always validated");
    model.store.restore(&ckpt)?;
    Ok(TrainOutcome {
        best: ckpt,
        best_iteration,
        best_val_loss,
        final_val_loss,
        history,
    })
}

/// Trains on the manifest's train split, validating on its validation pairs.
pub fn train_on_manifest(
    model: &mut PSimGnn,
    manifest: &DatasetManifest,
    config: &TrainConfig,
) -> Result<(TrainOutcome, PreparedSet)> {
    let set = PreparedSet::new(model, manifest)?;
    let train_pairs = set.pairs(&manifest.train_pairs()?)?;
    let val_pairs = set.pairs(&manifest.val_pairs()?)?;
    let outcome = train(model, &set, &train_pairs, &val_pairs, config)?;
    Ok((outcome, set))
}
