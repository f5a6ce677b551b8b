//! Trainable building blocks. Each holds parameter ids into a shared
//! [`ParamStore`] and records its forward pass on a [`Tape`].

use std::sync::Arc;

use rand::Rng;

use crate::autodiff::{AutodiffError, ParamId, ParamStore, Tape, Tensor, Var};
use crate::graph::Graph;

type Result<T> = std::result::Result<T, AutodiffError>;

/// Initial PReLU slope.
pub const PRELU_INIT: f64 = 0.25;
/// Biases start small and nonzero so activations sit away from the PReLU kink.
pub const BIAS_INIT: f64 = 0.1;

/// `y = x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, din: usize, dout: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            w: store.add_glorot(format!("{name}.w"), din, dout, rng)?,
            b: store.add_uniform(format!("{name}.b"), 1, dout, BIAS_INIT, rng)?,
        })
    }

    pub fn forward(&self, t: &mut Tape, s: &ParamStore, x: Var) -> Result<Var> {
        let w = t.param(s, self.w);
        let b = t.param(s, self.b);
        let y = t.matmul(x, w)?;
        t.add_row(y, b)
    }

    /// Rescales and shifts each output column so that, over the rows of
    /// `inputs`, it has zero mean and unit variance. Columns with no spread
    /// are only centred.
    pub fn standardize(&self, s: &mut ParamStore, inputs: &[Tensor]) -> Result<()> {
        let outputs = inputs.iter().map(|x| self.apply(s, x)).collect::<Result<Vec<_>>>()?;
        let cols = s.value(self.b).cols();
        let rows: usize = outputs.iter().map(Tensor::rows).sum();
        if rows == 0 {
            return Ok(());
        }
        let mut mean = vec![0.0; cols];
        let mut sq = vec![0.0; cols];
        for y in &outputs {
            for r in y.data().chunks(cols) {
                for (j, v) in r.iter().enumerate() {
                    mean[j] += v;
                    sq[j] += v * v;
                }
            }
        }
        let n = rows as f64;
        let scale: Vec<f64> = (0..cols)
            .map(|j| {
                mean[j] /= n;
                let var = (sq[j] / n - mean[j] * mean[j]).max(0.0);
                if var > CALIBRATION_MIN_VAR {
                    1.0 / var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        for row in s.value_mut(self.w).data_mut().chunks_mut(cols) {
            for (v, k) in row.iter_mut().zip(&scale) {
                *v *= k;
            }
        }
        for ((b, m), k) in s.value_mut(self.b).data_mut().iter_mut().zip(&mean).zip(&scale) {
            *b = (*b - m) * k;
        }
        Ok(())
    }

    /// Forward pass on plain values.
    pub fn apply(&self, s: &ParamStore, x: &Tensor) -> Result<Tensor> {
        let mut t = Tape::new();
        let x = t.constant(x.clone())?;
        let y = self.forward(&mut t, s, x)?;
        Ok(t.value(y).clone())
    }
}

/// Output columns with variance below this are centred but not rescaled.
const CALIBRATION_MIN_VAR: f64 = 1e-12;

/// PReLU with one learnable slope.
#[derive(Debug, Clone, PartialEq)]
pub struct Prelu {
    pub slope: ParamId,
}

impl Prelu {
    pub fn new(store: &mut ParamStore, name: &str) -> Result<Self> {
        Ok(Self {
            slope: store.add(format!("{name}.slope"), Tensor::scalar(PRELU_INIT))?,
        })
    }

    pub fn forward(&self, t: &mut Tape, s: &ParamStore, x: Var) -> Result<Var> {
        let a = t.param(s, self.slope);
        t.prelu(x, a)
    }
}

/// Two linear layers with a PReLU in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub first: Linear,
    pub act: Prelu,
    pub second: Linear,
}

impl Mlp {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        din: usize,
        hidden: usize,
        dout: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Self {
            first: Linear::new(store, &format!("{name}.0"), din, hidden, rng)?,
            act: Prelu::new(store, &format!("{name}.act"))?,
            second: Linear::new(store, &format!("{name}.1"), hidden, dout, rng)?,
        })
    }

    pub fn forward(&self, t: &mut Tape, s: &ParamStore, x: Var) -> Result<Var> {
        let h = self.first.forward(t, s, x)?;
        let h = self.act.forward(t, s, h)?;
        self.second.forward(t, s, h)
    }
}

/// A graph prepared for message passing: directed edge lists in both
/// directions plus the degree column.
#[derive(Debug, Clone)]
pub struct GraphIndex {
    pub graph: Graph,
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
    /// `n x 1` node degrees.
    pub degree: Tensor,
}

impl GraphIndex {
    pub fn new(graph: Graph) -> Self {
        let mut src = Vec::with_capacity(2 * graph.edge_count());
        let mut dst = Vec::with_capacity(2 * graph.edge_count());
        for &(u, v) in graph.edges() {
            src.extend([u, v]);
            dst.extend([v, u]);
        }
        let n = graph.node_count();
        let degree = Tensor::new(n, 1, (0..n).map(|v| graph.degree(v) as f64).collect());
        Self {
            graph,
            src: src.into(),
            dst: dst.into(),
            degree,
        }
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn has_edges(&self) -> bool {
        !self.src.is_empty()
    }
}

/// `h' = MLP((1 + eps) h + sum of neighbour rows)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GinLayer {
    pub eps: ParamId,
    pub mlp: Mlp,
}

impl GinLayer {
    pub fn new(store: &mut ParamStore, name: &str, din: usize, dout: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            eps: store.add(format!("{name}.eps"), Tensor::scalar(0.0))?,
            mlp: Mlp::new(store, &format!("{name}.mlp"), din, dout, dout, rng)?,
        })
    }

    pub fn forward(&self, t: &mut Tape, s: &ParamStore, x: Var, g: &GraphIndex) -> Result<Var> {
        let eps = t.param(s, self.eps);
        let one_plus = t.shift(eps, 1.0)?;
        let own = t.mul_scalar(x, one_plus)?;
        let combined = if g.has_edges() {
            let neigh = t.aggregate(x, g.src.clone(), g.dst.clone())?;
            t.add(own, neigh)?
        } else {
            own
        };
        self.mlp.forward(t, s, combined)
    }
}

impl GinLayer {
    /// `(1 + eps) h + sum of neighbour rows` on plain values.
    fn combine(&self, s: &ParamStore, x: &Tensor, g: &GraphIndex) -> Result<Tensor> {
        let mut t = Tape::new();
        let x = t.constant(x.clone())?;
        let eps = t.param(s, self.eps);
        let one_plus = t.shift(eps, 1.0)?;
        let mut h = t.mul_scalar(x, one_plus)?;
        if g.has_edges() {
            let neigh = t.aggregate(x, g.src.clone(), g.dst.clone())?;
            h = t.add(h, neigh)?;
        }
        Ok(t.value(h).clone())
    }
}

fn apply_prelu(act: &Prelu, s: &ParamStore, x: &Tensor) -> Result<Tensor> {
    let mut t = Tape::new();
    let x = t.constant(x.clone())?;
    let y = act.forward(&mut t, s, x)?;
    Ok(t.value(y).clone())
}

/// Stacked GIN layers with PReLU between consecutive layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub layers: Vec<GinLayer>,
    pub between: Vec<Prelu>,
}

impl Encoder {
    pub fn new(store: &mut ParamStore, din: usize, dims: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut layers = Vec::with_capacity(dims.len());
        let mut between = Vec::new();
        let mut prev = din;
        for (l, &d) in dims.iter().enumerate() {
            layers.push(GinLayer::new(store, &format!("enc.{l}"), prev, d, rng)?);
            if l + 1 < dims.len() {
                between.push(Prelu::new(store, &format!("enc.{l}.out"))?);
            }
            prev = d;
        }
        Ok(Self { layers, between })
    }

    pub fn forward(&self, t: &mut Tape, s: &ParamStore, x: Var, g: &GraphIndex) -> Result<Var> {
        let mut h = x;
        for (l, layer) in self.layers.iter().enumerate() {
            h = layer.forward(t, s, h, g)?;
            if let Some(act) = self.between.get(l) {
                h = act.forward(t, s, h)?;
            }
        }
        Ok(h)
    }

    /// Data-dependent initialisation: standardizes every linear layer in
    /// forward order on the nodes of `graphs`, each fed `features`.
    pub fn calibrate(&self, s: &mut ParamStore, graphs: &[&GraphIndex], features: impl Fn(usize) -> Tensor) -> Result<()> {
        let mut h: Vec<Tensor> = graphs.iter().map(|g| features(g.node_count())).collect();
        for (l, layer) in self.layers.iter().enumerate() {
            let combined = graphs
                .iter()
                .zip(&h)
                .map(|(g, x)| layer.combine(s, x, g))
                .collect::<Result<Vec<_>>>()?;
            layer.mlp.first.standardize(s, &combined)?;
            let hidden = combined
                .iter()
                .map(|x| apply_prelu(&layer.mlp.act, s, &layer.mlp.first.apply(s, x)?))
                .collect::<Result<Vec<_>>>()?;
            layer.mlp.second.standardize(s, &hidden)?;
            h = hidden.iter().map(|x| layer.mlp.second.apply(s, x)).collect::<Result<Vec<_>>>()?;
            if let Some(act) = self.between.get(l) {
                h = h.iter().map(|x| apply_prelu(act, s, x)).collect::<Result<Vec<_>>>()?;
            }
        }
        Ok(())
    }
}

/// Attention pooling: `z = tanh(mean(X) W_z)`, `h = sum_j sigmoid(x_j . z) x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionPool {
    pub wz: ParamId,
}

impl AttentionPool {
    pub fn new(store: &mut ParamStore, dim: usize, rng: &mut impl Rng) -> Result<Self> {
        Ok(Self {
            wz: store.add_glorot("pool.wz", dim, dim, rng)?,
        })
    }

    pub fn forward(&self, t: &mut Tape, s: &ParamStore, x: Var, attention: bool) -> Result<Var> {
        let mean = t.mean_rows(x)?;
        if !attention {
            return Ok(mean);
        }
        let wz = t.param(s, self.wz);
        let ctx = t.matmul(mean, wz)?;
        let z = t.tanh(ctx)?;
        let zt = t.transpose(z)?;
        let logits = t.matmul(x, zt)?;
        let w = t.sigmoid(logits)?;
        let wt = t.transpose(w)?;
        t.matmul(wt, x)
    }
}

/// Within-graph message `MLP(h_i ⊕ h_j)` with the first layer split into
/// target and source blocks, summed over incoming edges.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageMlp {
    pub w_dst: ParamId,
    pub w_src: ParamId,
    pub b: ParamId,
    pub act: Prelu,
    pub second: Linear,
}

impl MessageMlp {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        // Glorot bound of the unsplit (2 dim) x hidden matrix
        let bound = (6.0 / (2 * dim + hidden) as f64).sqrt();
        Ok(Self {
            w_dst: store.add_uniform(format!("{name}.0.w_dst"), dim, hidden, bound, rng)?,
            w_src: store.add_uniform(format!("{name}.0.w_src"), dim, hidden, bound, rng)?,
            b: store.add_uniform(format!("{name}.0.b"), 1, hidden, BIAS_INIT, rng)?,
            act: Prelu::new(store, &format!("{name}.act"))?,
            second: Linear::new(store, &format!("{name}.1"), hidden, dim, rng)?,
        })
    }

    /// Row `i` of the result is the sum of messages over edges `j -> i`.
    pub fn forward(&self, t: &mut Tape, s: &ParamStore, h: Var, g: &GraphIndex) -> Result<Var> {
        let w_dst = t.param(s, self.w_dst);
        let w_src = t.param(s, self.w_src);
        let a = t.matmul(h, w_dst)?;
        let b = t.matmul(h, w_src)?;
        let a = t.gather_rows(a, g.dst.clone())?;
        let b = t.gather_rows(b, g.src.clone())?;
        let pre = t.add(a, b)?;
        let bias = t.param(s, self.b);
        let pre = t.add_row(pre, bias)?;
        let hidden = self.act.forward(t, s, pre)?;
        let summed = t.scatter_add_rows(hidden, g.dst.clone(), g.node_count())?;
        // second layer after the sum: sum_e (p_e W + b) = (sum_e p_e) W + deg b
        let w2 = t.param(s, self.second.w);
        let b2 = t.param(s, self.second.b);
        let out = t.matmul(summed, w2)?;
        let deg = t.constant(g.degree.clone())?;
        let deg_b = t.matmul(deg, b2)?;
        t.add(out, deg_b)
    }
}

/// Pair ordering used for both the coarse score vector and top-m selection:
/// descending score, ties by lexicographic `(i, j)`.
pub fn ranked_pairs(scores: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = scores
        .iter()
        .enumerate()
        .flat_map(|(i, row)| (0..row.len()).map(move |j| (i, j)))
        .collect();
    pairs.sort_by(|&(a, b), &(c, d)| scores[c][d].total_cmp(&scores[a][b]).then((a, b).cmp(&(c, d))));
    pairs
}
