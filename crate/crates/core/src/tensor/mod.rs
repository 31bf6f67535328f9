//! Dense `f64` matrices and a reverse-mode autodiff tape.
//!
//! A [`Tape`] records every operation as a node holding its forward value.
//! Nodes are appended in evaluation order, so the tape is a topological order
//! of the computation graph and `backward` is a single reverse sweep.
//! Parameters live outside the tape in a [`ParamStore`]; each forward pass
//! copies the parameters it reads onto the tape as leaves and `backward`
//! returns their gradients, which are summed into a [`GradStore`].
//!
//! Everything is a matrix. Scalars are `1 × 1`, vectors are single rows.

mod checkpoint;
mod gradcheck;
mod param;

use std::rc::Rc;

use rand::Rng;

use crate::error::{shape_err, Error, Result};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CKPT_MAGIC};
pub use gradcheck::{grad_check, param_grad_check, relative_error, GRADCHECK_FLOOR};
pub use param::{GradStore, ParamId, ParamStore, Parameter};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return shape_err("tensor", format!("extents must be positive, got {rows}x{cols}"));
        }
        if data.len() != rows * cols {
            return shape_err("tensor", format!("{} values for {rows}x{cols}", data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn full(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn scalar(value: f64) -> Self {
        Self { rows: 1, cols: 1, data: vec![value] }
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Self { rows: 1, cols: data.len(), data }
    }

    pub fn column(data: Vec<f64>) -> Self {
        Self { rows: data.len(), cols: 1, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single value of a `1 × 1` tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Plain matrix product without recording anything.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return shape_err("matmul", format!("{:?} x {:?}", self.shape(), other.shape()));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        matmul_into(&self.data, &other.data, &mut out, self.rows, self.cols, other.cols);
        Ok(Tensor { rows: self.rows, cols: other.cols, data: out })
    }
}

/// `out += a (m×k) · b (k×n)`.
fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

type Index = Rc<[usize]>;

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Rc<[f64]>),
    LeakyRelu(Var, f64),
    Elu(Var),
    Sigmoid(Var),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Index),
    ScatterAddRows(Var, Index),
    HeadDot { x: Var, att: Var, heads: usize },
    HeadScale { x: Var, w: Var, heads: usize },
    SegmentSoftmax(Var, Index, usize),
    SumAll(Var),
    MeanAll(Var),
    CrossEntropy { logits: Var, labels: Index, coef: Rc<[f64]> },
    Bce { pred: Var, target: Rc<[f64]> },
    Mse { pred: Var, target: Rc<[f64]> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Probability clamp used by [`Tape::bce_loss`].
pub const BCE_EPS: f64 = 1e-12;

/// Records a computation for one forward/backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    edge_visits: usize,
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

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Message-passing edges processed on this tape (see `nn::gat`).
    pub fn edge_visits(&self) -> usize {
        self.edge_visits
    }

    pub fn record_edge_visits(&mut self, n: usize) {
        self.edge_visits += n;
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Differentiable leaf that is not a stored parameter.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return shape_err(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data.iter().zip(&vb.data).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor { rows: va.rows, cols: va.cols, data };
        let rg = self.rg(&[a, b]);
        self.push(out, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_with(a, b, |x, y| x + y, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_with(a, b, |x, y| x - y, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b)))
    }

    /// Adds the `1 × n` row `b` to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        if self.shape(b) != (1, c) {
            return shape_err("add_row", format!("{:?} + {:?}", (r, c), self.shape(b)));
        }
        let bias = &self.value(b).data;
        let mut data = self.value(x).data.clone();
        for row in data.chunks_exact_mut(c) {
            for (v, bv) in row.iter_mut().zip(bias) {
                *v += bv;
            }
        }
        let rg = self.rg(&[x, b]);
        Ok(self.push(Tensor { rows: r, cols: c, data }, Op::AddRow(x, b), rg))
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let vx = self.value(x);
        let out = Tensor { rows: vx.rows, cols: vx.cols, data: vx.data.iter().map(|&v| f(v)).collect() };
        let rg = self.rg(&[x]);
        self.push(out, op, rg)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.map(x, |v| v * c, Op::Scale(x, c))
    }

    /// Elementwise product with a constant of the same shape.
    pub fn mul_const(&mut self, x: Var, c: Tensor) -> Result<Var> {
        if self.shape(x) != c.shape() {
            return shape_err("mul_const", format!("{:?} vs {:?}", self.shape(x), c.shape()));
        }
        let data = self.value(x).data.iter().zip(&c.data).map(|(a, b)| a * b).collect();
        let out = Tensor { rows: c.rows, cols: c.cols, data };
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::MulConst(x, c.data.into()), rg))
    }

    /// Inverted dropout: zeroes entries with probability `p` and rescales the
    /// survivors by `1 / (1 - p)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, rng: &mut R) -> Result<Var> {
        if p <= 0.0 {
            return Ok(x);
        }
        if p >= 1.0 {
            return Err(Error::InvalidArgument(format!("dropout probability {p}")));
        }
        let (r, c) = self.shape(x);
        let keep = 1.0 / (1.0 - p);
        let mask = (0..r * c).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
        self.mul_const(x, Tensor { rows: r, cols: c, data: mask })
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.map(x, |v| if v > 0.0 { v } else { slope * v }, Op::LeakyRelu(x, slope))
    }

    /// `x` for positive inputs, `exp(x) - 1` otherwise.
    pub fn elu(&mut self, x: Var) -> Var {
        self.map(x, |v| if v > 0.0 { v } else { v.exp_m1() }, Op::Elu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return shape_err("concat_cols", "no inputs");
        };
        let rows = self.shape(first).0;
        if let Some(&bad) = parts.iter().find(|&&p| self.shape(p).0 != rows) {
            return shape_err("concat_cols", format!("{rows} rows vs {:?}", self.shape(bad)));
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(Tensor { rows, cols, data }, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Row `i` of the output is row `index[i]` of `x`.
    pub fn gather_rows(&mut self, x: Var, index: &Rc<[usize]>) -> Result<Var> {
        let vx = self.value(x);
        if index.is_empty() {
            return shape_err("gather_rows", "empty index");
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= vx.rows) {
            return shape_err("gather_rows", format!("row {bad} of {}", vx.rows));
        }
        let c = vx.cols;
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index.iter() {
            data.extend_from_slice(vx.row(i));
        }
        let out = Tensor { rows: index.len(), cols: c, data };
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::GatherRows(x, index.clone()), rg))
    }

    /// Sums row `e` of `x` into output row `index[e]`; output has `rows` rows.
    pub fn scatter_add_rows(&mut self, x: Var, index: &Rc<[usize]>, rows: usize) -> Result<Var> {
        let vx = self.value(x);
        if index.len() != vx.rows {
            return shape_err("scatter_add_rows", format!("{} indices for {} rows", index.len(), vx.rows));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return shape_err("scatter_add_rows", format!("target row {bad} of {rows}"));
        }
        let c = vx.cols;
        let mut data = vec![0.0; rows * c];
        for (e, &i) in index.iter().enumerate() {
            for (o, v) in data[i * c..(i + 1) * c].iter_mut().zip(vx.row(e)) {
                *o += v;
            }
        }
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor { rows, cols: c, data }, Op::ScatterAddRows(x, index.clone()), rg))
    }

    /// Per-head dot products: `x` is `n × (heads·f)`, `att` is `heads × f`,
    /// output `[i, h] = Σ_k x[i, h·f + k] · att[h, k]`.
    pub fn head_dot(&mut self, x: Var, att: Var, heads: usize) -> Result<Var> {
        let (vx, va) = (self.value(x), self.value(att));
        let f = va.cols;
        if va.rows != heads || vx.cols != heads * f {
            return shape_err("head_dot", format!("{:?} with attention {:?}, {heads} heads", vx.shape(), va.shape()));
        }
        let mut data = vec![0.0; vx.rows * heads];
        for (i, out) in data.chunks_exact_mut(heads).enumerate() {
            let row = vx.row(i);
            for (h, o) in out.iter_mut().enumerate() {
                *o = row[h * f..(h + 1) * f].iter().zip(va.row(h)).map(|(a, b)| a * b).sum();
            }
        }
        let out = Tensor { rows: vx.rows, cols: heads, data };
        let rg = self.rg(&[x, att]);
        Ok(self.push(out, Op::HeadDot { x, att, heads }, rg))
    }

    /// Scales head block `h` of each row of `x` (`E × (heads·f)`) by `w[e, h]`.
    pub fn head_scale(&mut self, x: Var, w: Var, heads: usize) -> Result<Var> {
        let (vx, vw) = (self.value(x), self.value(w));
        if vw.shape() != (vx.rows, heads) || vx.cols % heads != 0 {
            return shape_err("head_scale", format!("{:?} by {:?}, {heads} heads", vx.shape(), vw.shape()));
        }
        let f = vx.cols / heads;
        let mut data = vx.data.clone();
        for (e, row) in data.chunks_exact_mut(vx.cols).enumerate() {
            for (h, block) in row.chunks_exact_mut(f).enumerate() {
                let s = vw.data[e * heads + h];
                for v in block {
                    *v *= s;
                }
            }
        }
        let out = Tensor { rows: vx.rows, cols: vx.cols, data };
        let rg = self.rg(&[x, w]);
        Ok(self.push(out, Op::HeadScale { x, w, heads }, rg))
    }

    /// Column-wise softmax within segments: entries `e` with equal
    /// `segment[e]` are normalized together, independently per column.
    pub fn segment_softmax(&mut self, scores: Var, segment: &Rc<[usize]>, n_segments: usize) -> Result<Var> {
        let vs = self.value(scores);
        if segment.len() != vs.rows {
            return shape_err("segment_softmax", format!("{} segment ids for {} rows", segment.len(), vs.rows));
        }
        if let Some(&bad) = segment.iter().find(|&&s| s >= n_segments) {
            return shape_err("segment_softmax", format!("segment {bad} of {n_segments}"));
        }
        let h = vs.cols;
        let mut max = vec![f64::NEG_INFINITY; n_segments * h];
        for (e, &s) in segment.iter().enumerate() {
            for (m, &v) in max[s * h..(s + 1) * h].iter_mut().zip(vs.row(e)) {
                *m = m.max(v);
            }
        }
        let mut data = vec![0.0; vs.data.len()];
        let mut sum = vec![0.0; n_segments * h];
        for (e, &s) in segment.iter().enumerate() {
            for k in 0..h {
                let ex = (vs.data[e * h + k] - max[s * h + k]).exp();
                data[e * h + k] = ex;
                sum[s * h + k] += ex;
            }
        }
        for (e, &s) in segment.iter().enumerate() {
            for k in 0..h {
                data[e * h + k] /= sum[s * h + k];
            }
        }
        let out = Tensor { rows: vs.rows, cols: h, data };
        let rg = self.rg(&[scores]);
        Ok(self.push(out, Op::SegmentSoftmax(scores, segment.clone(), n_segments), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::SumAll(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let vx = self.value(x);
        let s = vx.data.iter().sum::<f64>() / vx.data.len() as f64;
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::MeanAll(x), rg)
    }

    /// Class-weighted cross-entropy over rows of `logits`:
    /// `Σ_i w[y_i] · nll_i / Σ_i w[y_i]`.
    pub fn weighted_cross_entropy(&mut self, logits: Var, labels: &[usize], class_weights: &[f64]) -> Result<Var> {
        let vl = self.value(logits);
        let (n, c) = vl.shape();
        if labels.len() != n {
            return shape_err("cross_entropy", format!("{} labels for {n} rows", labels.len()));
        }
        if class_weights.len() != c {
            return shape_err("cross_entropy", format!("{} class weights for {c} classes", class_weights.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range for {c} classes")));
        }
        if class_weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument("class weights must be positive".into()));
        }
        let total: f64 = labels.iter().map(|&y| class_weights[y]).sum();
        let coef: Rc<[f64]> = labels.iter().map(|&y| class_weights[y] / total).collect();
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = vl.row(i);
            loss += coef[i] * (log_sum_exp(row) - row[y]);
        }
        let rg = self.rg(&[logits]);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, labels: labels.into(), coef }, rg))
    }

    /// Mean binary cross-entropy of probabilities against `{0, 1}` targets.
    /// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]`.
    pub fn bce_loss(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let vp = self.value(pred);
        if vp.len() != target.len() {
            return shape_err("bce", format!("{} predictions for {} targets", vp.len(), target.len()));
        }
        let n = target.len() as f64;
        let loss = vp
            .data
            .iter()
            .zip(target)
            .map(|(&p, &t)| {
                let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / n;
        let rg = self.rg(&[pred]);
        Ok(self.push(Tensor::scalar(loss), Op::Bce { pred, target: target.into() }, rg))
    }

    pub fn mse_loss(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let vp = self.value(pred);
        if vp.len() != target.len() {
            return shape_err("mse", format!("{} predictions for {} targets", vp.len(), target.len()));
        }
        let n = target.len() as f64;
        let loss = vp.data.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
        let rg = self.rg(&[pred]);
        Ok(self.push(Tensor::scalar(loss), Op::Mse { pred, target: target.into() }, rg))
    }

    /// Reverse sweep from the scalar `loss`. Returns gradients of every
    /// differentiable leaf (inputs and parameters) reachable from it.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(Error::NonScalarLoss(r, c));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf | Op::Param(_)) {
                grads[idx] = Some(g);
                continue;
            }
            self.propagate(node, &g, &mut grads);
        }
        let leaves = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| {
                g.map(|data| {
                    let v = &self.nodes[i].value;
                    Tensor { rows: v.rows, cols: v.cols, data }
                })
            })
            .collect();
        Ok(Gradients { grads: leaves })
    }

    /// Convenience: `backward` and accumulate parameter gradients into `store`.
    pub fn backward_into(&self, loss: Var, store: &mut GradStore) -> Result<()> {
        let g = self.backward(loss)?;
        g.accumulate(self, store);
        Ok(())
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (va.rows, va.cols, vb.cols);
                self.acc(grads, *a, |ga| {
                    for i in 0..m {
                        let g_row = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let b_row = &vb.data[p * n..(p + 1) * n];
                            ga[i * k + p] += g_row.iter().zip(b_row).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                self.acc(grads, *b, |gb| {
                    for i in 0..m {
                        let g_row = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let av = va.data[i * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for (o, gv) in gb[p * n..(p + 1) * n].iter_mut().zip(g_row) {
                                *o += av * gv;
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                self.acc(grads, *a, |ga| add_into(ga, g));
                self.acc(grads, *b, |gb| add_into(gb, g));
            }
            Op::Sub(a, b) => {
                self.acc(grads, *a, |ga| add_into(ga, g));
                self.acc(grads, *b, |gb| gb.iter_mut().zip(g).for_each(|(o, v)| *o -= v));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (&self.value(*a).data, &self.value(*b).data);
                self.acc(grads, *a, |ga| {
                    for ((o, gv), bv) in ga.iter_mut().zip(g).zip(vb) {
                        *o += gv * bv;
                    }
                });
                self.acc(grads, *b, |gb| {
                    for ((o, gv), av) in gb.iter_mut().zip(g).zip(va) {
                        *o += gv * av;
                    }
                });
            }
            Op::AddRow(x, b) => {
                let c = out.cols;
                self.acc(grads, *x, |gx| add_into(gx, g));
                self.acc(grads, *b, |gb| {
                    for row in g.chunks_exact(c) {
                        add_into(gb, row);
                    }
                });
            }
            Op::Scale(x, c) => self.acc(grads, *x, |gx| gx.iter_mut().zip(g).for_each(|(o, v)| *o += c * v)),
            Op::MulConst(x, mask) => self.acc(grads, *x, |gx| {
                for ((o, gv), m) in gx.iter_mut().zip(g).zip(mask.iter()) {
                    *o += gv * m;
                }
            }),
            Op::LeakyRelu(x, slope) => {
                let vx = &self.value(*x).data;
                self.acc(grads, *x, |gx| {
                    for ((o, gv), xv) in gx.iter_mut().zip(g).zip(vx) {
                        *o += if *xv > 0.0 { *gv } else { slope * gv };
                    }
                });
            }
            Op::Elu(x) => {
                let vx = &self.value(*x).data;
                self.acc(grads, *x, |gx| {
                    for (((o, gv), xv), yv) in gx.iter_mut().zip(g).zip(vx).zip(&out.data) {
                        *o += if *xv > 0.0 { *gv } else { gv * (yv + 1.0) };
                    }
                });
            }
            Op::Sigmoid(x) => self.acc(grads, *x, |gx| {
                for ((o, gv), y) in gx.iter_mut().zip(g).zip(&out.data) {
                    *o += gv * y * (1.0 - y);
                }
            }),
            Op::ConcatCols(parts) => {
                let total = out.cols;
                let mut offset = 0;
                for &p in parts {
                    let c = self.shape(p).1;
                    self.acc(grads, p, |gp| {
                        for (dst, src) in gp.chunks_exact_mut(c).zip(g.chunks_exact(total)) {
                            add_into(dst, &src[offset..offset + c]);
                        }
                    });
                    offset += c;
                }
            }
            Op::GatherRows(x, index) => {
                let c = out.cols;
                self.acc(grads, *x, |gx| {
                    for (e, &i) in index.iter().enumerate() {
                        add_into(&mut gx[i * c..(i + 1) * c], &g[e * c..(e + 1) * c]);
                    }
                });
            }
            Op::ScatterAddRows(x, index) => {
                let c = out.cols;
                self.acc(grads, *x, |gx| {
                    for (e, &i) in index.iter().enumerate() {
                        add_into(&mut gx[e * c..(e + 1) * c], &g[i * c..(i + 1) * c]);
                    }
                });
            }
            Op::HeadDot { x, att, heads } => {
                let (vx, va) = (self.value(*x), self.value(*att));
                let (h, f, w) = (*heads, va.cols, vx.cols);
                self.acc(grads, *x, |gx| {
                    for (i, row) in gx.chunks_exact_mut(w).enumerate() {
                        for k in 0..h {
                            let gv = g[i * h + k];
                            for (o, a) in row[k * f..(k + 1) * f].iter_mut().zip(va.row(k)) {
                                *o += gv * a;
                            }
                        }
                    }
                });
                self.acc(grads, *att, |ga| {
                    for i in 0..vx.rows {
                        let row = vx.row(i);
                        for k in 0..h {
                            let gv = g[i * h + k];
                            for (o, xv) in ga[k * f..(k + 1) * f].iter_mut().zip(&row[k * f..(k + 1) * f]) {
                                *o += gv * xv;
                            }
                        }
                    }
                });
            }
            Op::HeadScale { x, w, heads } => {
                let (vx, vw) = (self.value(*x), self.value(*w));
                let h = *heads;
                let width = vx.cols;
                let f = width / h;
                self.acc(grads, *x, |gx| {
                    for e in 0..vx.rows {
                        for k in 0..h {
                            let s = vw.data[e * h + k];
                            let base = e * width + k * f;
                            for (o, gv) in gx[base..base + f].iter_mut().zip(&g[base..base + f]) {
                                *o += gv * s;
                            }
                        }
                    }
                });
                self.acc(grads, *w, |gw| {
                    for e in 0..vx.rows {
                        for k in 0..h {
                            let base = e * width + k * f;
                            gw[e * h + k] += g[base..base + f]
                                .iter()
                                .zip(&vx.data[base..base + f])
                                .map(|(a, b)| a * b)
                                .sum::<f64>();
                        }
                    }
                });
            }
            Op::SegmentSoftmax(s, segment, n_segments) => {
                let h = out.cols;
                let y = &out.data;
                let mut dot = vec![0.0; n_segments * h];
                for (e, &seg) in segment.iter().enumerate() {
                    for k in 0..h {
                        dot[seg * h + k] += g[e * h + k] * y[e * h + k];
                    }
                }
                self.acc(grads, *s, |gs| {
                    for (e, &seg) in segment.iter().enumerate() {
                        for k in 0..h {
                            let i = e * h + k;
                            gs[i] += y[i] * (g[i] - dot[seg * h + k]);
                        }
                    }
                });
            }
            Op::SumAll(x) => self.acc(grads, *x, |gx| gx.iter_mut().for_each(|o| *o += g[0])),
            Op::MeanAll(x) => {
                let c = g[0] / self.value(*x).len() as f64;
                self.acc(grads, *x, |gx| gx.iter_mut().for_each(|o| *o += c));
            }
            Op::CrossEntropy { logits, labels, coef } => {
                let vl = self.value(*logits);
                let c = vl.cols;
                self.acc(grads, *logits, |gl| {
                    for (i, &y) in labels.iter().enumerate() {
                        let row = vl.row(i);
                        let lse = log_sum_exp(row);
                        let scale = g[0] * coef[i];
                        for (k, o) in gl[i * c..(i + 1) * c].iter_mut().enumerate() {
                            let p = (row[k] - lse).exp();
                            *o += scale * (p - if k == y { 1.0 } else { 0.0 });
                        }
                    }
                });
            }
            Op::Bce { pred, target } => {
                let vp = &self.value(*pred).data;
                let n = target.len() as f64;
                self.acc(grads, *pred, |gp| {
                    for ((o, &p), &t) in gp.iter_mut().zip(vp).zip(target.iter()) {
                        let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                        *o += g[0] * (p - t) / (p * (1.0 - p)) / n;
                    }
                });
            }
            Op::Mse { pred, target } => {
                let vp = &self.value(*pred).data;
                let n = target.len() as f64;
                self.acc(grads, *pred, |gp| {
                    for ((o, p), t) in gp.iter_mut().zip(vp).zip(target.iter()) {
                        *o += g[0] * 2.0 * (p - t) / n;
                    }
                });
            }
        }
    }

    fn acc(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]);
        f(slot);
    }
}

/// Leaf gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a leaf; `None` if the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Adds every parameter leaf's gradient into its slot in `store`.
    pub fn accumulate(&self, tape: &Tape, store: &mut GradStore) {
        for (node, g) in tape.nodes.iter().zip(&self.grads) {
            if let (Op::Param(id), Some(g)) = (&node.op, g) {
                store.add(*id, g.data());
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (o, v) in dst.iter_mut().zip(src) {
        *o += v;
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
