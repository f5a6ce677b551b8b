//! The partition-based graph similarity model.
//!
//! Both graphs are split into `k` communities. Every community is encoded by
//! a GIN stack and attention-pooled; the `k x k` cosine matrix between the
//! two sides forms the coarse score vector. The `m` best community pairs are
//! then matched node by node with cross-graph attention, giving `m` fine
//! scores. Two small heads and a fully connected stack fuse both vectors
//! into one similarity in `(0, 1)`.

pub mod layers;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{grad_check, AutodiffError, Checkpoint, GradCheckReport, ParamStore, Tape, Tensor, Var};
use crate::graph::Graph;
use crate::partition::{fluidc, PartitionError, PartitionResult, DEFAULT_MAX_SWEEPS};
use layers::{ranked_pairs, AttentionPool, Encoder, GraphIndex, Linear, MessageMlp, Mlp, Prelu};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("k = {k} exceeds the node count {n} of graph {id:?}")]
    KTooLarge { k: usize, n: usize, id: String },
    #[error("m = {m} out of range 0..={max}")]
    MOutOfRange { m: usize, max: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Communities per graph.
    pub k: usize,
    /// Community pairs sent to node-level matching.
    pub m: usize,
    /// Propagation rounds of the matcher.
    pub t: usize,
    /// Width of the constant initial node features.
    pub feature_dim: usize,
    pub feature_value: f64,
    pub gin_dims: Vec<usize>,
    /// Matcher working width and MLP hidden width.
    pub match_dim: usize,
    pub sub_attention_off: bool,
    pub cross_attention_off: bool,
    pub cross_messages_off: bool,
    pub within_messages_off: bool,
    /// Parameter initialization seed.
    pub init_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            k: 3,
            m: 9,
            t: 3,
            feature_dim: 1,
            feature_value: 1.0,
            gin_dims: vec![64, 32, 16],
            match_dim: 16,
            sub_attention_off: false,
            cross_attention_off: false,
            cross_messages_off: false,
            within_messages_off: false,
            init_seed: 0,
        }
    }
}

/// Width of the coarse and fine head outputs.
pub const HEAD_DIM: usize = 8;
/// Hidden widths of the final fully connected stack after the concatenation.
pub const FUSION_DIMS: [usize; 3] = [8, 4, 2];

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(ModelError::Config("k must be at least 1".into()));
        }
        if self.m > self.k * self.k {
            return Err(ModelError::MOutOfRange {
                m: self.m,
                max: self.k * self.k,
            });
        }
        if self.feature_dim == 0 || self.match_dim == 0 || self.gin_dims.is_empty() || self.gin_dims.contains(&0) {
            return Err(ModelError::Config("dimensions must be positive".into()));
        }
        if !self.feature_value.is_finite() {
            return Err(ModelError::Config("feature value must be finite".into()));
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let c: Self = serde_json::from_slice(bytes).map_err(|e| ModelError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("config serializes")
    }

    pub fn embedding_dim(&self) -> usize {
        *self.gin_dims.last().expect("validated")
    }
}

/// A graph with its cached partition and per-community indices.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub id: String,
    pub partition: PartitionResult,
    pub communities: Vec<GraphIndex>,
}

impl PreparedGraph {
    /// Partitions `g` into `k` communities with FluidC seeded by `seed`.
    pub fn new(g: &Graph, k: usize, seed: u64) -> Result<Self> {
        if k > g.node_count() {
            return Err(ModelError::KTooLarge {
                k,
                n: g.node_count(),
                id: g.id().to_string(),
            });
        }
        let partition = fluidc(g, k, seed, DEFAULT_MAX_SWEEPS)?;
        Ok(Self::from_partition(g, partition))
    }

    pub fn from_partition(g: &Graph, partition: PartitionResult) -> Self {
        let communities = partition
            .subgraphs
            .iter()
            .map(|(sub, _)| GraphIndex::new(sub.clone()))
            .collect();
        Self {
            id: g.id().to_string(),
            partition,
            communities,
        }
    }

    pub fn k(&self) -> usize {
        self.communities.len()
    }
}

/// Node-level matcher for one community pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Matcher {
    pub embed: Linear,
    pub message: MessageMlp,
    pub update: Mlp,
    pub gate: Mlp,
    pub value: Mlp,
    pub readout: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FineHead {
    Linear(Linear, Prelu),
    /// Learned stand-in when `m = 0`.
    Constant(crate::autodiff::ParamId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fusion {
    pub coarse: Linear,
    pub coarse_act: Prelu,
    pub fine: FineHead,
    pub hidden: Vec<(Linear, Prelu)>,
    pub out: Linear,
}

/// Counters filled in by a forward pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardStats {
    pub propagation_steps: usize,
    pub fine_pairs: usize,
}

/// Intermediate results of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub score: Var,
    /// `k x k` coarse cosine matrix values.
    pub coarse: Vec<Vec<f64>>,
    /// Selected community pairs, best first.
    pub selected: Vec<(usize, usize)>,
    pub fine: Vec<f64>,
    pub stats: ForwardStats,
}

#[derive(Debug, Clone)]
pub struct PSimGnn {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub encoder: Encoder,
    pub pool: AttentionPool,
    pub matcher: Matcher,
    pub fusion: Fusion,
}

impl PSimGnn {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut store = ParamStore::new();
        let s = &mut store;
        let dim = config.embedding_dim();
        let md = config.match_dim;
        let encoder = Encoder::new(s, config.feature_dim, &config.gin_dims, &mut rng)?;
        let pool = AttentionPool::new(s, dim, &mut rng)?;
        let matcher = Matcher {
            embed: Linear::new(s, "match.embed", config.feature_dim, md, &mut rng)?,
            message: MessageMlp::new(s, "match.msg", md, md, &mut rng)?,
            update: Mlp::new(s, "match.update", 3 * md, md, md, &mut rng)?,
            gate: Mlp::new(s, "match.gate", md, md, md, &mut rng)?,
            value: Mlp::new(s, "match.value", md, md, md, &mut rng)?,
            readout: Mlp::new(s, "match.readout", md, md, md, &mut rng)?,
        };
        let k2 = config.k * config.k;
        let fine = if config.m == 0 {
            FineHead::Constant(s.add_uniform("fuse.fine.const", 1, HEAD_DIM, BIAS_BOUND, &mut rng)?)
        } else {
            FineHead::Linear(
                Linear::new(s, "fuse.fine", config.m, HEAD_DIM, &mut rng)?,
                Prelu::new(s, "fuse.fine.act")?,
            )
        };
        let mut hidden = Vec::new();
        let mut prev = 2 * HEAD_DIM;
        for (l, &d) in FUSION_DIMS.iter().enumerate() {
            hidden.push((
                Linear::new(s, &format!("fuse.hidden.{l}"), prev, d, &mut rng)?,
                Prelu::new(s, &format!("fuse.hidden.{l}.act"))?,
            ));
            prev = d;
        }
        let fusion = Fusion {
            coarse: Linear::new(s, "fuse.coarse", k2, HEAD_DIM, &mut rng)?,
            coarse_act: Prelu::new(s, "fuse.coarse.act")?,
            fine,
            hidden,
            out: Linear::new(s, "fuse.out", prev, 1, &mut rng)?,
        };
        Ok(Self {
            config,
            store,
            encoder,
            pool,
            matcher,
            fusion,
        })
    }

    /// Rebuilds the model from a config and restores parameter values.
    pub fn from_checkpoint(config: ModelConfig, ckpt: &Checkpoint) -> Result<Self> {
        let mut model = Self::new(config)?;
        model.store.restore(ckpt)?;
        Ok(model)
    }

    pub fn prepare(&self, g: &Graph, partition_seed: u64) -> Result<PreparedGraph> {
        PreparedGraph::new(g, self.config.k, partition_seed)
    }

    /// Data-dependent initialisation of the encoder on the communities of
    /// `graphs`; see [`Encoder::calibrate`].
    pub fn calibrate_encoder(&mut self, graphs: &[&PreparedGraph]) -> Result<()> {
        let communities: Vec<&GraphIndex> = graphs.iter().flat_map(|g| &g.communities).collect();
        let (dim, value) = (self.config.feature_dim, self.config.feature_value);
        self.encoder
            .calibrate(&mut self.store, &communities, |n| Tensor::full(n, dim, value))?;
        Ok(())
    }

    fn features(&self, t: &mut Tape, n: usize) -> Result<Var> {
        let x = Tensor::full(n, self.config.feature_dim, self.config.feature_value);
        Ok(t.constant(x)?)
    }

    /// `n x 16` node embeddings of one community.
    pub fn encode_subgraph(&self, t: &mut Tape, store: &ParamStore, g: &GraphIndex) -> Result<Var> {
        let x = self.features(t, g.node_count())?;
        Ok(self.encoder.forward(t, store, x, g)?)
    }

    /// Pooled `1 x 16` embedding of one community.
    pub fn embed_subgraph(&self, t: &mut Tape, store: &ParamStore, g: &GraphIndex) -> Result<Var> {
        let x = self.encode_subgraph(t, store, g)?;
        Ok(self.pool.forward(t, store, x, !self.config.sub_attention_off)?)
    }

    /// `k x k` cosine scores between pooled community embeddings.
    pub fn coarse_scores(&self, t: &mut Tape, store: &ParamStore, a: &PreparedGraph, b: &PreparedGraph) -> Result<Vec<Vec<Var>>> {
        if a.k() != b.k() {
            return Err(ModelError::LengthMismatch {
                expected: a.k(),
                got: b.k(),
            });
        }
        let ea: Vec<Var> = a.communities.iter().map(|g| self.embed_subgraph(t, store, g)).collect::<Result<_>>()?;
        let eb: Vec<Var> = b.communities.iter().map(|g| self.embed_subgraph(t, store, g)).collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(ea.len());
        for &x in &ea {
            out.push(eb.iter().map(|&y| t.cosine(x, y)).collect::<std::result::Result<Vec<_>, _>>()?);
        }
        Ok(out)
    }

    /// One round of within-graph and cross-graph message passing on both sides.
    pub fn propagation_step(
        &self,
        t: &mut Tape,
        store: &ParamStore,
        h1: Var,
        h2: Var,
        g1: &GraphIndex,
        g2: &GraphIndex,
    ) -> Result<(Var, Var)> {
        let c = &self.config;
        let within = |t: &mut Tape, h: Var, g: &GraphIndex| -> Result<Var> {
            if c.within_messages_off || !g.has_edges() {
                Ok(t.constant(Tensor::zeros(g.node_count(), c.match_dim))?)
            } else {
                Ok(self.matcher.message.forward(t, store, h, g)?)
            }
        };
        let nu1 = within(t, h1, g1)?;
        let nu2 = within(t, h2, g2)?;

        let (mu1, mu2) = if c.cross_messages_off {
            (
                t.constant(Tensor::zeros(g1.node_count(), c.match_dim))?,
                t.constant(Tensor::zeros(g2.node_count(), c.match_dim))?,
            )
        } else {
            let (a12, a21) = if c.cross_attention_off {
                let (n1, n2) = (g1.node_count(), g2.node_count());
                (
                    t.constant(Tensor::full(n1, n2, 1.0 / n2 as f64))?,
                    t.constant(Tensor::full(n2, n1, 1.0 / n1 as f64))?,
                )
            } else {
                let h2t = t.transpose(h2)?;
                let logits = t.matmul(h1, h2t)?;
                let logits_t = t.transpose(logits)?;
                (t.row_softmax(logits)?, t.row_softmax(logits_t)?)
            };
            // sum_j a_ij (h_i - h_j) = h_i - (A H_other)_i since rows of A sum to 1
            let attended1 = t.matmul(a12, h2)?;
            let attended2 = t.matmul(a21, h1)?;
            (t.sub(h1, attended1)?, t.sub(h2, attended2)?)
        };

        let update = |t: &mut Tape, h: Var, nu: Var, mu: Var| -> Result<Var> {
            let x = t.concat_cols(&[h, nu, mu])?;
            Ok(self.matcher.update.forward(t, store, x)?)
        };
        Ok((update(t, h1, nu1, mu1)?, update(t, h2, nu2, mu2)?))
    }

    /// Gated sum readout after the propagation rounds, `1 x 16`.
    pub fn aggregate_matched(&self, t: &mut Tape, store: &ParamStore, h: Var) -> Result<Var> {
        let gate = self.matcher.gate.forward(t, store, h)?;
        let gate = t.sigmoid(gate)?;
        let value = self.matcher.value.forward(t, store, h)?;
        let gated = t.mul(gate, value)?;
        let summed = t.sum_rows(gated)?;
        Ok(self.matcher.readout.forward(t, store, summed)?)
    }

    /// Cosine between matched readouts of a community pair after `T` rounds.
    pub fn fine_score(
        &self,
        t: &mut Tape,
        store: &ParamStore,
        g1: &GraphIndex,
        g2: &GraphIndex,
        stats: &mut ForwardStats,
    ) -> Result<Var> {
        let x1 = self.features(t, g1.node_count())?;
        let x2 = self.features(t, g2.node_count())?;
        let mut h1 = self.matcher.embed.forward(t, store, x1)?;
        let mut h2 = self.matcher.embed.forward(t, store, x2)?;
        for _ in 0..self.config.t {
            (h1, h2) = self.propagation_step(t, store, h1, h2, g1, g2)?;
            stats.propagation_steps += 1;
        }
        let r1 = self.aggregate_matched(t, store, h1)?;
        let r2 = self.aggregate_matched(t, store, h2)?;
        stats.fine_pairs += 1;
        Ok(t.cosine(r1, r2)?)
    }

    /// Combines `k^2` coarse and `m` fine scores (each a `1 x 1` var) into a score in `(0, 1)`.
    pub fn fuse(&self, t: &mut Tape, store: &ParamStore, coarse: &[Var], fine: &[Var]) -> Result<Var> {
        let k2 = self.config.k * self.config.k;
        if coarse.len() != k2 {
            return Err(ModelError::LengthMismatch {
                expected: k2,
                got: coarse.len(),
            });
        }
        if fine.len() != self.config.m {
            return Err(ModelError::LengthMismatch {
                expected: self.config.m,
                got: fine.len(),
            });
        }
        let f = &self.fusion;
        let cv = t.concat_cols(coarse)?;
        let sc = f.coarse.forward(t, store, cv)?;
        let sc = f.coarse_act.forward(t, store, sc)?;
        let sf = match &f.fine {
            FineHead::Linear(lin, act) => {
                let fv = t.concat_cols(fine)?;
                let h = lin.forward(t, store, fv)?;
                act.forward(t, store, h)?
            }
            FineHead::Constant(id) => t.param(store, *id),
        };
        let mut h = t.concat_cols(&[sc, sf])?;
        for (lin, act) in &f.hidden {
            h = lin.forward(t, store, h)?;
            h = act.forward(t, store, h)?;
        }
        let logit = f.out.forward(t, store, h)?;
        Ok(t.sigmoid(logit)?)
    }

    /// Full forward pass for one pair, recorded on `t`.
    pub fn forward_with(
        &self,
        t: &mut Tape,
        store: &ParamStore,
        a: &PreparedGraph,
        b: &PreparedGraph,
    ) -> Result<ForwardOutput> {
        let k = self.config.k;
        if a.k() != k || b.k() != k {
            return Err(ModelError::Config(format!(
                "prepared graphs have {} and {} communities, model expects {k}",
                a.k(),
                b.k()
            )));
        }
        let scores = self.coarse_scores(t, store, a, b)?;
        let coarse: Vec<Vec<f64>> = scores
            .iter()
            .map(|row| row.iter().map(|&v| t.scalar(v)).collect())
            .collect();
        let order = ranked_pairs(&coarse);
        let coarse_vars: Vec<Var> = order.iter().map(|&(i, j)| scores[i][j]).collect();
        let selected = order[..self.config.m].to_vec();
        let mut stats = ForwardStats::default();
        let mut fine_vars = Vec::with_capacity(selected.len());
        for &(i, j) in &selected {
            fine_vars.push(self.fine_score(t, store, &a.communities[i], &b.communities[j], &mut stats)?);
        }
        let fine = fine_vars.iter().map(|&v| t.scalar(v)).collect();
        let score = self.fuse(t, store, &coarse_vars, &fine_vars)?;
        Ok(ForwardOutput {
            score,
            coarse,
            selected,
            fine,
            stats,
        })
    }

    pub fn forward(&self, t: &mut Tape, a: &PreparedGraph, b: &PreparedGraph) -> Result<ForwardOutput> {
        self.forward_with(t, &self.store, a, b)
    }

    /// Similarity of one pair.
    pub fn predict(&self, a: &PreparedGraph, b: &PreparedGraph) -> Result<f64> {
        Ok(self.predict_with_stats(a, b)?.0)
    }

    pub fn predict_with_stats(&self, a: &PreparedGraph, b: &PreparedGraph) -> Result<(f64, ForwardStats)> {
        let mut t = Tape::new();
        let out = self.forward(&mut t, a, b)?;
        Ok((t.scalar(out.score), out.stats))
    }
}

const BIAS_BOUND: f64 = layers::BIAS_INIT;

/// Finite-difference step for [`grad_check_pair`]; larger steps straddle
/// PReLU kinks, smaller ones drown in rounding noise.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Central-difference audit of every parameter coordinate on one pair.
pub fn grad_check_pair(model: &mut PSimGnn, a: &PreparedGraph, b: &PreparedGraph, step: f64) -> Result<GradCheckReport> {
    let frozen = model.clone();
    grad_check(&mut model.store, |t, s| Ok(frozen.forward_with(t, s, a, b)?.score), step)
}

/// The `m` highest-scoring index pairs, best first; ties by lexicographic `(i, j)`.
pub fn select_top_m(scores: &[Vec<f64>], m: usize) -> Result<Vec<(usize, usize)>> {
    let total: usize = scores.iter().map(Vec::len).sum();
    if m > total {
        return Err(ModelError::MOutOfRange { m, max: total });
    }
    let mut order = ranked_pairs(scores);
    order.truncate(m);
    Ok(order)
}
