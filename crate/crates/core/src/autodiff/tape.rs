use std::collections::HashMap;
use std::sync::Arc;

use super::params::{ParamId, ParamStore};
use super::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Tensor};
use super::AutodiffError;

type Result<T> = std::result::Result<T, AutodiffError>;

/// Denominator floor for [`Tape::cosine`].
pub const COSINE_EPS: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulScalar(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    ConcatCols(Vec<Var>),
    SumRows(Var),
    MeanRows(Var),
    SumAll(Var),
    Tanh(Var),
    Sigmoid(Var),
    Prelu(Var, Var),
    RowSoftmax(Var),
    Dot(Var, Var),
    Norm(Var),
    Cosine(Var, Var),
    Gather(Var, Arc<[usize]>),
    ScatterAdd(Var, Arc<[usize]>),
    Aggregate(Var, Arc<[usize]>, Arc<[usize]>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation for reverse-mode differentiation.
///
/// Values are immutable once recorded. A tape lives for one forward pass;
/// parameters are copied in on first use and cached for the rest of the pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

fn check_same(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(AutodiffError::ShapeMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        })
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: op_name });
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A constant: no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push("constant", value, Op::Leaf, false)
    }

    /// A differentiable input whose gradient can be read back with
    /// [`Gradients::wrt`].
    pub fn input(&mut self, value: Tensor) -> Result<Var> {
        self.push("input", value, Op::Leaf, true)
    }

    /// Loads a parameter; repeated loads of the same id return the same var.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        self.nodes.push(Node {
            value: store.value(id).clone(),
            op: Op::Param(id),
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.rows() {
            return Err(mismatch("matmul", av, bv));
        }
        let (r, k, c) = (av.rows(), av.cols(), bv.cols());
        let mut out = vec![0.0; r * c];
        matmul_acc(&mut out, av.data(), bv.data(), r, k, c);
        let rg = self.rg(a) || self.rg(b);
        self.push("matmul", Tensor::new(r, c, out), Op::MatMul(a, b), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let (r, c) = (av.rows(), av.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = av.data()[i * c + j];
            }
        }
        let rg = self.rg(a);
        self.push("transpose", Tensor::new(c, r, out), Op::Transpose(a), rg)
    }

    fn zip_with(&mut self, name: &'static str, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        check_same(name, av, bv)?;
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(av.rows(), av.cols(), data);
        let rg = self.rg(a) || self.rg(b);
        self.push(name, out, op, rg)
    }

    fn map(&mut self, name: &'static str, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let av = self.value(a);
        let out = Tensor::new(av.rows(), av.cols(), av.data().iter().map(|&x| f(x)).collect());
        let rg = self.rg(a);
        self.push(name, out, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, Op::Mul(a, b), |x, y| x * y)
    }

    /// `x + b` with the `1 x c` row `b` added to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(mismatch("add_row", xv, bv));
        }
        let c = xv.cols();
        let mut data = xv.data().to_vec();
        for row in data.chunks_mut(c.max(1)) {
            add_into(row, bv.data());
        }
        let out = Tensor::new(xv.rows(), c, data);
        let rg = self.rg(x) || self.rg(b);
        self.push("add_row", out, Op::AddRow(x, b), rg)
    }

    /// `x * s` for a `1 x 1` tensor `s`.
    pub fn mul_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        let (xv, sv) = (self.value(x), self.value(s));
        if sv.shape() != [1, 1] {
            return Err(mismatch("mul_scalar", xv, sv));
        }
        let k = sv.item();
        let out = Tensor::new(xv.rows(), xv.cols(), xv.data().iter().map(|&v| v * k).collect());
        let rg = self.rg(x) || self.rg(s);
        self.push("mul_scalar", out, Op::MulScalar(x, s), rg)
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Result<Var> {
        self.map("scale", x, Op::Scale(x, k), |v| v * k)
    }

    /// `x + k` elementwise for a constant `k`.
    pub fn shift(&mut self, x: Var, k: f64) -> Result<Var> {
        self.map("shift", x, Op::Shift(x), |v| v + k)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.value(*parts.first().expect("concat_cols needs at least one input"));
        let rows = first.rows();
        for &p in parts {
            let pv = self.value(p);
            if pv.rows() != rows {
                return Err(mismatch("concat_cols", first, pv));
            }
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push("concat_cols", Tensor::new(rows, cols, data), Op::ConcatCols(parts.to_vec()), rg)
    }

    /// Column sums: `r x c -> 1 x c`.
    pub fn sum_rows(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let c = xv.cols();
        let mut out = vec![0.0; c];
        for r in 0..xv.rows() {
            add_into(&mut out, xv.row_slice(r));
        }
        let rg = self.rg(x);
        self.push("sum_rows", Tensor::new(1, c, out), Op::SumRows(x), rg)
    }

    /// Column means: `r x c -> 1 x c`. Requires at least one row.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rows() == 0 {
            return Err(AutodiffError::EmptyInput { op: "mean_rows" });
        }
        let (n, c) = (xv.rows() as f64, xv.cols());
        let mut out = vec![0.0; c];
        for r in 0..xv.rows() {
            add_into(&mut out, xv.row_slice(r));
        }
        out.iter_mut().for_each(|v| *v /= n);
        let rg = self.rg(x);
        self.push("mean_rows", Tensor::new(1, c, out), Op::MeanRows(x), rg)
    }

    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push("sum_all", Tensor::scalar(s), Op::SumAll(x), rg)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.map("tanh", x, Op::Tanh(x), f64::tanh)
    }

    /// Logistic function `1 / (1 + e^-x)`.
    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.map("sigmoid", x, Op::Sigmoid(x), logistic)
    }

    /// Parametric ReLU with a single shared slope `a` (a `1 x 1` tensor).
    pub fn prelu(&mut self, x: Var, a: Var) -> Result<Var> {
        let (xv, av) = (self.value(x), self.value(a));
        if av.shape() != [1, 1] {
            return Err(mismatch("prelu", xv, av));
        }
        let k = av.item();
        let out = Tensor::new(
            xv.rows(),
            xv.cols(),
            xv.data().iter().map(|&v| if v > 0.0 { v } else { k * v }).collect(),
        );
        let rg = self.rg(x) || self.rg(a);
        self.push("prelu", out, Op::Prelu(x, a), rg)
    }

    pub fn row_softmax(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let c = xv.cols();
        let mut data = xv.data().to_vec();
        for row in data.chunks_mut(c.max(1)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                total += *v;
            }
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        let out = Tensor::new(xv.rows(), c, data);
        let rg = self.rg(x);
        self.push("row_softmax", out, Op::RowSoftmax(x), rg)
    }

    /// Inner product of two same-shape tensors, `1 x 1`.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        check_same("dot", av, bv)?;
        let d = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).sum();
        let rg = self.rg(a) || self.rg(b);
        self.push("dot", Tensor::scalar(d), Op::Dot(a, b), rg)
    }

    /// Euclidean norm, `1 x 1`.
    pub fn l2_norm(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).data().iter().map(|x| x * x).sum::<f64>().sqrt();
        let rg = self.rg(a);
        self.push("l2_norm", Tensor::scalar(n), Op::Norm(a), rg)
    }

    /// Cosine similarity `a.b / max(|a||b|, COSINE_EPS)`, `1 x 1`.
    pub fn cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        check_same("cosine", av, bv)?;
        let (d, na, nb) = cosine_parts(av.data(), bv.data());
        let c = d / (na * nb).max(COSINE_EPS);
        let rg = self.rg(a) || self.rg(b);
        self.push("cosine", Tensor::scalar(c), Op::Cosine(a, b), rg)
    }

    /// Rows of `x` picked by `index` (repeats allowed).
    pub fn gather_rows(&mut self, x: Var, index: Arc<[usize]>) -> Result<Var> {
        let xv = self.value(x);
        let c = xv.cols();
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index.iter() {
            if i >= xv.rows() {
                return Err(AutodiffError::IndexOutOfRange { op: "gather_rows", index: i, len: xv.rows() });
            }
            data.extend_from_slice(xv.row_slice(i));
        }
        let out = Tensor::new(index.len(), c, data);
        let rg = self.rg(x);
        self.push("gather_rows", out, Op::Gather(x, index), rg)
    }

    /// Sums row `e` of `x` into row `index[e]` of an `out_rows x c` result.
    pub fn scatter_add_rows(&mut self, x: Var, index: Arc<[usize]>, out_rows: usize) -> Result<Var> {
        let xv = self.value(x);
        if index.len() != xv.rows() {
            return Err(AutodiffError::IndexOutOfRange { op: "scatter_add_rows", index: index.len(), len: xv.rows() });
        }
        let c = xv.cols();
        let mut out = vec![0.0; out_rows * c];
        for (e, &i) in index.iter().enumerate() {
            if i >= out_rows {
                return Err(AutodiffError::IndexOutOfRange { op: "scatter_add_rows", index: i, len: out_rows });
            }
            add_into(&mut out[i * c..(i + 1) * c], xv.row_slice(e));
        }
        let rg = self.rg(x);
        self.push("scatter_add_rows", Tensor::new(out_rows, c, out), Op::ScatterAdd(x, index), rg)
    }

    /// Message passing along directed pairs: `out[dst[e]] += x[src[e]]`.
    /// The output has as many rows as `x`.
    pub fn aggregate(&mut self, x: Var, src: Arc<[usize]>, dst: Arc<[usize]>) -> Result<Var> {
        let xv = self.value(x);
        let (n, c) = (xv.rows(), xv.cols());
        assert_eq!(src.len(), dst.len(), "aggregate endpoints must pair up");
        let mut out = vec![0.0; n * c];
        for (&s, &d) in src.iter().zip(dst.iter()) {
            if s >= n || d >= n {
                return Err(AutodiffError::IndexOutOfRange { op: "aggregate", index: s.max(d), len: n });
            }
            add_into(&mut out[d * c..(d + 1) * c], xv.row_slice(s));
        }
        let rg = self.rg(x);
        self.push("aggregate", Tensor::new(n, c, out), Op::Aggregate(x, src, dst), rg)
    }

    /// Gradient of the scalar `output` with respect to every recorded value.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let shape = self.value(output).shape();
        if shape != [1, 1] {
            return Err(AutodiffError::NonScalar { shape });
        }
        self.backward_seeded(&[(output, Tensor::scalar(1.0))])
    }

    /// Reverse pass starting from arbitrary upstream gradients on several
    /// outputs (vector-Jacobian product).
    pub fn backward_seeded(&self, seeds: &[(Var, Tensor)]) -> Result<Gradients> {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let mut start = 0;
        for (v, g) in seeds {
            let value = self.value(*v);
            if value.shape() != g.shape() {
                return Err(mismatch("backward seed", value, g));
            }
            acc(&mut grads, *v, value.len(), |d| add_into(d, g.data()));
            start = start.max(v.0 + 1);
        }
        for i in (0..start).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        let mut params = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&node.op, &grads[i]) {
                params.push((*id, g.clone()));
            }
        }
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (r, k, c) = (av.rows(), av.cols(), bv.cols());
                if needs(*a) {
                    acc(grads, *a, av.len(), |d| matmul_nt_acc(d, g, bv.data(), r, k, c));
                }
                if needs(*b) {
                    acc(grads, *b, bv.len(), |d| matmul_tn_acc(d, av.data(), g, r, k, c));
                }
            }
            Op::Transpose(a) => {
                let av = val(*a);
                let (r, c) = (av.rows(), av.cols());
                acc(grads, *a, av.len(), |d| {
                    for i in 0..r {
                        for j in 0..c {
                            d[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if needs(v) {
                        acc(grads, v, g.len(), |d| add_into(d, g));
                    }
                }
            }
            Op::Sub(a, b) => {
                if needs(*a) {
                    acc(grads, *a, g.len(), |d| add_into(d, g));
                }
                if needs(*b) {
                    acc(grads, *b, g.len(), |d| d.iter_mut().zip(g).for_each(|(d, g)| *d -= g));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if needs(*a) {
                    acc(grads, *a, g.len(), |d| {
                        for ((d, g), y) in d.iter_mut().zip(g).zip(bv.data()) {
                            *d += g * y;
                        }
                    });
                }
                if needs(*b) {
                    acc(grads, *b, g.len(), |d| {
                        for ((d, g), x) in d.iter_mut().zip(g).zip(av.data()) {
                            *d += g * x;
                        }
                    });
                }
            }
            Op::AddRow(x, b) => {
                if needs(*x) {
                    acc(grads, *x, g.len(), |d| add_into(d, g));
                }
                if needs(*b) {
                    let c = val(*b).cols();
                    acc(grads, *b, c, |d| {
                        for row in g.chunks(c.max(1)) {
                            add_into(d, row);
                        }
                    });
                }
            }
            Op::MulScalar(x, s) => {
                let (xv, k) = (val(*x), val(*s).item());
                if needs(*x) {
                    acc(grads, *x, g.len(), |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g * k));
                }
                if needs(*s) {
                    let t: f64 = g.iter().zip(xv.data()).map(|(g, x)| g * x).sum();
                    acc(grads, *s, 1, |d| d[0] += t);
                }
            }
            Op::Scale(x, k) => {
                acc(grads, *x, g.len(), |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g * k));
            }
            Op::Shift(x) => acc(grads, *x, g.len(), |d| add_into(d, g)),
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let pv = val(p);
                    let pc = pv.cols();
                    if needs(p) {
                        acc(grads, p, pv.len(), |d| {
                            for r in 0..pv.rows() {
                                add_into(&mut d[r * pc..(r + 1) * pc], &g[r * total + offset..r * total + offset + pc]);
                            }
                        });
                    }
                    offset += pc;
                }
            }
            Op::SumRows(x) | Op::MeanRows(x) => {
                let xv = val(*x);
                let scale = if matches!(node.op, Op::MeanRows(_)) { 1.0 / xv.rows() as f64 } else { 1.0 };
                let c = xv.cols();
                acc(grads, *x, xv.len(), |d| {
                    for row in d.chunks_mut(c.max(1)) {
                        row.iter_mut().zip(g).for_each(|(d, g)| *d += g * scale);
                    }
                });
            }
            Op::SumAll(x) => {
                let n = val(*x).len();
                acc(grads, *x, n, |d| d.iter_mut().for_each(|d| *d += g[0]));
            }
            Op::Tanh(x) => {
                let y = node.value.data();
                acc(grads, *x, g.len(), |d| {
                    for ((d, g), y) in d.iter_mut().zip(g).zip(y) {
                        *d += g * (1.0 - y * y);
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                acc(grads, *x, g.len(), |d| {
                    for ((d, g), y) in d.iter_mut().zip(g).zip(y) {
                        *d += g * y * (1.0 - y);
                    }
                });
            }
            Op::Prelu(x, a) => {
                let (xv, k) = (val(*x), val(*a).item());
                if needs(*x) {
                    acc(grads, *x, g.len(), |d| {
                        for ((d, g), x) in d.iter_mut().zip(g).zip(xv.data()) {
                            *d += if *x > 0.0 { *g } else { g * k };
                        }
                    });
                }
                if needs(*a) {
                    let t: f64 = g
                        .iter()
                        .zip(xv.data())
                        .map(|(g, &x)| if x > 0.0 { 0.0 } else { g * x })
                        .sum();
                    acc(grads, *a, 1, |d| d[0] += t);
                }
            }
            Op::RowSoftmax(x) => {
                let y = &node.value;
                let c = y.cols();
                acc(grads, *x, g.len(), |d| {
                    for r in 0..y.rows() {
                        let yr = y.row_slice(r);
                        let gr = &g[r * c..(r + 1) * c];
                        let inner: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        for j in 0..c {
                            d[r * c + j] += yr[j] * (gr[j] - inner);
                        }
                    }
                });
            }
            Op::Dot(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if needs(*a) {
                    acc(grads, *a, av.len(), |d| d.iter_mut().zip(bv.data()).for_each(|(d, y)| *d += g[0] * y));
                }
                if needs(*b) {
                    acc(grads, *b, bv.len(), |d| d.iter_mut().zip(av.data()).for_each(|(d, x)| *d += g[0] * x));
                }
            }
            Op::Norm(a) => {
                let av = val(*a);
                let n = node.value.item();
                if n > 0.0 {
                    acc(grads, *a, av.len(), |d| d.iter_mut().zip(av.data()).for_each(|(d, x)| *d += g[0] * x / n));
                }
            }
            Op::Cosine(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (_, na, nb) = cosine_parts(av.data(), bv.data());
                let c = node.value.item();
                let guarded = na * nb <= COSINE_EPS;
                let den = (na * nb).max(COSINE_EPS);
                for (this, other, n_this, nv) in [(*a, bv, na, av), (*b, av, nb, bv)] {
                    if !needs(this) {
                        continue;
                    }
                    acc(grads, this, nv.len(), |d| {
                        for ((d, o), x) in d.iter_mut().zip(other.data()).zip(nv.data()) {
                            let mut dc = o / den;
                            if !guarded {
                                dc -= c * x / (n_this * n_this);
                            }
                            *d += g[0] * dc;
                        }
                    });
                }
            }
            Op::Gather(x, index) => {
                let xv = val(*x);
                let c = xv.cols();
                acc(grads, *x, xv.len(), |d| {
                    for (e, &i) in index.iter().enumerate() {
                        add_into(&mut d[i * c..(i + 1) * c], &g[e * c..(e + 1) * c]);
                    }
                });
            }
            Op::ScatterAdd(x, index) => {
                let xv = val(*x);
                let c = xv.cols();
                acc(grads, *x, xv.len(), |d| {
                    for (e, &i) in index.iter().enumerate() {
                        add_into(&mut d[e * c..(e + 1) * c], &g[i * c..(i + 1) * c]);
                    }
                });
            }
            Op::Aggregate(x, src, dst) => {
                let xv = val(*x);
                let c = xv.cols();
                acc(grads, *x, xv.len(), |d| {
                    for (&s, &t) in src.iter().zip(dst.iter()) {
                        add_into(&mut d[s * c..(s + 1) * c], &g[t * c..(t + 1) * c]);
                    }
                });
            }
        }
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], v: Var, len: usize, f: impl FnOnce(&mut [f64])) {
    let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
    f(slot);
}

fn cosine_parts(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let mut d = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        d += x * y;
        na += x * x;
        nb += y * y;
    }
    (d, na.sqrt(), nb.sqrt())
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Result of a reverse pass.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(ParamId, Vec<f64>)>,
}

impl Gradients {
    /// Gradient with respect to `v`, or `None` if nothing flowed into it.
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn param_grads(&self) -> &[(ParamId, Vec<f64>)] {
        &self.params
    }

    /// Adds the parameter gradients into the store's accumulators.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for (id, g) in &self.params {
            store.accumulate_grad(*id, g);
        }
    }
}
