//! Tape-based reverse-mode differentiation.
//!
//! Every operation evaluates eagerly and appends a node to the tape. Node
//! order is recording order, which is a valid topological order, so
//! `backward` is a single reverse sweep.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;

use super::tensor::{
    self, axpy, cross_entropy_parts, layer_norm_parts, matmul_into, softmax_row_masked, Tensor,
};
use super::NumericsError;

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    graph: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    MatMulBt(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Relu(usize),
    Softmax(usize),
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    Embedding {
        table: usize,
        ids: Vec<usize>,
    },
    SliceCols {
        x: usize,
        start: usize,
    },
    ConcatCols(Vec<usize>),
    ConcatRows(usize, usize),
    MulConst(usize, Tensor),
    AddConst(usize),
    CrossEntropy {
        logits: usize,
        targets: Vec<usize>,
        weights: Vec<f64>,
        denom: f64,
        probs: Tensor,
    },
    Sum(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recording tape. One graph per forward pass; discard it after `backward`.
#[derive(Debug)]
pub struct Graph {
    id: u64,
    nodes: Vec<Node>,
    grad_enabled: bool,
}

/// Adjoints produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    graph: u64,
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros when `v` did not
    /// contribute to the loss.
    pub fn get(&self, v: Var) -> Tensor {
        assert_eq!(v.graph, self.graph, "variable from a different graph");
        match &self.grads[v.index] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.index]),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        assert_eq!(v.graph, self.graph, "variable from a different graph");
        self.grads[v.index]
            .take()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.index]))
    }
}

fn accumulate(slot: &mut Option<Tensor>, delta: Tensor) {
    match slot {
        Some(g) => g.add_assign(&delta),
        None => *slot = Some(delta),
    }
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    /// A tape that records gradients.
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// An evaluation-only tape; `backward` on it fails with `NotTraced`.
    pub fn inference() -> Self {
        Self {
            grad_enabled: false,
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn idx(&self, v: Var) -> Result<usize, NumericsError> {
        if v.graph != self.id || v.index >= self.nodes.len() {
            return Err(NumericsError::NotTraced);
        }
        Ok(v.index)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[usize]) -> Var {
        let requires_grad =
            self.grad_enabled && inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            graph: self.id,
            index: self.nodes.len() - 1,
        }
    }

    /// A constant input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, &[])
    }

    /// A trainable input whose gradient `backward` reports.
    pub fn param(&mut self, value: Tensor) -> Var {
        let v = self.push(value, Op::Leaf, &[]);
        self.nodes[v.index].requires_grad = self.grad_enabled;
        v
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[self.idx(v).expect("variable belongs to this graph")].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let out = tensor::matmul(&self.nodes[ia].value, &self.nodes[ib].value)?;
        Ok(self.push(out, Op::MatMul(ia, ib), &[ia, ib]))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let out = tensor::matmul_bt(&self.nodes[ia].value, &self.nodes[ib].value)?;
        Ok(self.push(out, Op::MatMulBt(ia, ib), &[ia, ib]))
    }

    fn same_shape(&self, op: &'static str, ia: usize, ib: usize) -> Result<(), NumericsError> {
        let (a, b) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if a.shape() != b.shape() {
            return Err(NumericsError::Dimension {
                op,
                left: a.shape().to_vec(),
                right: b.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        self.same_shape("add", ia, ib)?;
        let mut out = self.nodes[ia].value.clone();
        out.add_assign(&self.nodes[ib].value);
        Ok(self.push(out, Op::Add(ia, ib), &[ia, ib]))
    }

    /// Adds a length-`cols` vector to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var, NumericsError> {
        let (ix, ib) = (self.idx(x)?, self.idx(bias)?);
        let (xv, bv) = (&self.nodes[ix].value, &self.nodes[ib].value);
        if bv.len() != xv.cols() {
            return Err(NumericsError::Dimension {
                op: "add_row",
                left: xv.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let mut out = xv.clone();
        let c = xv.cols();
        for row in out.data_mut().chunks_mut(c) {
            for (o, b) in row.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        Ok(self.push(out, Op::AddRow(ix, ib), &[ix, ib]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        self.same_shape("mul", ia, ib)?;
        let mut out = self.nodes[ia].value.clone();
        for (o, b) in out.data_mut().iter_mut().zip(self.nodes[ib].value.data()) {
            *o *= b;
        }
        Ok(self.push(out, Op::Mul(ia, ib), &[ia, ib]))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var, NumericsError> {
        let ix = self.idx(x)?;
        let mut out = self.nodes[ix].value.clone();
        out.scale_in_place(s);
        Ok(self.push(out, Op::Scale(ix, s), &[ix]))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, NumericsError> {
        let ix = self.idx(x)?;
        let mut out = self.nodes[ix].value.clone();
        out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        Ok(self.push(out, Op::Relu(ix), &[ix]))
    }

    /// Row-wise softmax. `allowed`, when given, is a row-major `rows × cols`
    /// mask; disallowed entries receive exactly zero probability and a row
    /// with no allowed entry becomes all zeros.
    pub fn softmax_rows(
        &mut self,
        x: Var,
        allowed: Option<Arc<Vec<bool>>>,
    ) -> Result<Var, NumericsError> {
        let ix = self.idx(x)?;
        let xv = &self.nodes[ix].value;
        let cols = xv.cols();
        if let Some(mask) = &allowed {
            if mask.len() != xv.len() {
                return Err(NumericsError::Dimension {
                    op: "softmax_rows",
                    left: xv.shape().to_vec(),
                    right: vec![mask.len()],
                });
            }
        }
        let mut out = vec![0.0; xv.len()];
        for (r, (row, o)) in xv.data().chunks(cols).zip(out.chunks_mut(cols)).enumerate() {
            let m = allowed.as_ref().map(|m| &m[r * cols..(r + 1) * cols]);
            softmax_row_masked(row, m, o);
        }
        let out = Tensor::from_parts(xv.shape().to_vec(), out);
        Ok(self.push(out, Op::Softmax(ix), &[ix]))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var, NumericsError> {
        let (ix, ig, ib) = (self.idx(x)?, self.idx(gain)?, self.idx(bias)?);
        let (out, xhat, rstd) = layer_norm_parts(
            &self.nodes[ix].value,
            &self.nodes[ig].value,
            &self.nodes[ib].value,
            eps,
        )?;
        let op = Op::LayerNorm {
            x: ix,
            gain: ig,
            bias: ib,
            xhat,
            rstd,
        };
        Ok(self.push(out, op, &[ix, ig, ib]))
    }

    /// Gathers rows of `table` (shape `V × d`).
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var, NumericsError> {
        let it = self.idx(table)?;
        let tv = &self.nodes[it].value;
        let (v, d) = (tv.rows(), tv.cols());
        if ids.is_empty() {
            return Err(NumericsError::InvalidShape(vec![0, d]));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(NumericsError::TargetOutOfRange { target: bad, vocab: v });
        }
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            out.extend_from_slice(tv.row(id));
        }
        let out = Tensor::from_parts(vec![ids.len(), d], out);
        Ok(self.push(
            out,
            Op::Embedding {
                table: it,
                ids: ids.to_vec(),
            },
            &[it],
        ))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var, NumericsError> {
        let ix = self.idx(x)?;
        let xv = &self.nodes[ix].value;
        let c = xv.cols();
        if width == 0 || start + width > c {
            return Err(NumericsError::Dimension {
                op: "slice_cols",
                left: xv.shape().to_vec(),
                right: vec![start, width],
            });
        }
        let rows = xv.rows();
        let mut out = Vec::with_capacity(rows * width);
        for row in xv.data().chunks(c) {
            out.extend_from_slice(&row[start..start + width]);
        }
        let out = Tensor::from_parts(vec![rows, width], out);
        Ok(self.push(out, Op::SliceCols { x: ix, start }, &[ix]))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let idx: Vec<usize> = parts.iter().map(|&p| self.idx(p)).collect::<Result<_, _>>()?;
        let first = &self.nodes[idx[0]].value;
        let rows = first.rows();
        let mut total = 0;
        for &i in &idx {
            let v = &self.nodes[i].value;
            if v.rows() != rows {
                return Err(NumericsError::Dimension {
                    op: "concat_cols",
                    left: first.shape().to_vec(),
                    right: v.shape().to_vec(),
                });
            }
            total += v.cols();
        }
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &i in &idx {
                out.extend_from_slice(self.nodes[i].value.row(r));
            }
        }
        let out = Tensor::from_parts(vec![rows, total], out);
        Ok(self.push(out, Op::ConcatCols(idx.clone()), &idx))
    }

    /// Stacks `b` below `a`.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (av, bv) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if av.cols() != bv.cols() {
            return Err(NumericsError::Dimension {
                op: "concat_rows",
                left: av.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let mut data = av.data().to_vec();
        data.extend_from_slice(bv.data());
        let out = Tensor::from_parts(vec![av.rows() + bv.rows(), av.cols()], data);
        Ok(self.push(out, Op::ConcatRows(ia, ib), &[ia, ib]))
    }

    /// Elementwise product with a constant tensor.
    pub fn mul_const(&mut self, x: Var, c: Tensor) -> Result<Var, NumericsError> {
        let ix = self.idx(x)?;
        let xv = &self.nodes[ix].value;
        if xv.shape() != c.shape() {
            return Err(NumericsError::Dimension {
                op: "mul_const",
                left: xv.shape().to_vec(),
                right: c.shape().to_vec(),
            });
        }
        let mut out = xv.clone();
        for (o, m) in out.data_mut().iter_mut().zip(c.data()) {
            *o *= m;
        }
        Ok(self.push(out, Op::MulConst(ix, c), &[ix]))
    }

    pub fn add_const(&mut self, x: Var, c: &Tensor) -> Result<Var, NumericsError> {
        let ix = self.idx(x)?;
        let xv = &self.nodes[ix].value;
        if xv.shape() != c.shape() {
            return Err(NumericsError::Dimension {
                op: "add_const",
                left: xv.shape().to_vec(),
                right: c.shape().to_vec(),
            });
        }
        let mut out = xv.clone();
        out.add_assign(c);
        Ok(self.push(out, Op::AddConst(ix), &[ix]))
    }

    /// Inverted dropout: zeroes entries with probability `rate` and scales
    /// the survivors by `1 / (1 - rate)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, rng: &mut R) -> Result<Var, NumericsError> {
        if rate <= 0.0 {
            return Ok(x);
        }
        let shape = self.value(x).shape().to_vec();
        let n: usize = shape.iter().product();
        let keep = 1.0 / (1.0 - rate);
        let mask = (0..n)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        self.mul_const(x, Tensor::from_parts(shape, mask))
    }

    /// Weighted mean cross-entropy of `logits` rows against `targets`.
    pub fn weighted_cross_entropy(
        &mut self,
        logits: Var,
        targets: &[usize],
        weights: &[f64],
    ) -> Result<Var, NumericsError> {
        let denom: f64 = weights.iter().sum();
        if denom <= 0.0 {
            return Err(NumericsError::DegenerateWeights);
        }
        self.weighted_cross_entropy_with_denominator(logits, targets, weights, denom)
    }

    /// `Σ wᵢ · nllᵢ / denom` for an externally chosen `denom`, used to spread
    /// one batch-level normalisation across several per-sequence tapes.
    pub fn weighted_cross_entropy_with_denominator(
        &mut self,
        logits: Var,
        targets: &[usize],
        weights: &[f64],
        denom: f64,
    ) -> Result<Var, NumericsError> {
        if !(denom > 0.0) {
            return Err(NumericsError::DegenerateWeights);
        }
        let il = self.idx(logits)?;
        let (nll, probs) = cross_entropy_parts(&self.nodes[il].value, targets, weights)?;
        let loss = nll.iter().zip(weights).map(|(l, w)| l * w).sum::<f64>() / denom;
        let op = Op::CrossEntropy {
            logits: il,
            targets: targets.to_vec(),
            weights: weights.to_vec(),
            denom,
            probs,
        };
        Ok(self.push(Tensor::scalar(loss), op, &[il]))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, NumericsError> {
        let ix = self.idx(x)?;
        let s = self.nodes[ix].value.sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum(ix), &[ix]))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumericsError> {
        if !self.grad_enabled {
            return Err(NumericsError::NotTraced);
        }
        let il = self.idx(loss)?;
        let lv = &self.nodes[il].value;
        if lv.len() != 1 {
            return Err(NumericsError::NotScalar(lv.shape().to_vec()));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        grads[il] = Some(Tensor::ones(lv.shape()));

        for i in (0..=il).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            graph: self.id,
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn wants(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let val = |i: usize| &self.nodes[i].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    accumulate(&mut grads[*a], tensor::matmul_bt(g, val(*b)).expect("shape"));
                }
                if self.wants(*b) {
                    accumulate(&mut grads[*b], tensor::matmul_at(val(*a), g).expect("shape"));
                }
            }
            Op::MatMulBt(a, b) => {
                // c = a·bᵀ: da = g·b, db = gᵀ·a
                if self.wants(*a) {
                    let (m, n) = (g.rows(), g.cols());
                    let k = val(*b).cols();
                    let mut out = vec![0.0; m * k];
                    matmul_into(g.data(), val(*b).data(), &mut out, m, n, k);
                    accumulate(&mut grads[*a], Tensor::from_parts(vec![m, k], out));
                }
                if self.wants(*b) {
                    accumulate(&mut grads[*b], tensor::matmul_at(g, val(*a)).expect("shape"));
                }
            }
            Op::Add(a, b) => {
                for &i in [a, b] {
                    if self.wants(i) {
                        accumulate(&mut grads[i], g.clone());
                    }
                }
            }
            Op::AddRow(x, b) => {
                if self.wants(*x) {
                    accumulate(&mut grads[*x], g.clone());
                }
                if self.wants(*b) {
                    let c = g.cols();
                    let mut db = vec![0.0; c];
                    for row in g.data().chunks(c) {
                        axpy(1.0, row, &mut db);
                    }
                    accumulate(&mut grads[*b], Tensor::from_parts(val(*b).shape().to_vec(), db));
                }
            }
            Op::Mul(a, b) => {
                for (i, other) in [(*a, *b), (*b, *a)] {
                    if self.wants(i) {
                        let mut d = g.clone();
                        for (x, o) in d.data_mut().iter_mut().zip(val(other).data()) {
                            *x *= o;
                        }
                        accumulate(&mut grads[i], d);
                    }
                }
            }
            Op::Scale(x, s) => {
                if self.wants(*x) {
                    let mut d = g.clone();
                    d.scale_in_place(*s);
                    accumulate(&mut grads[*x], d);
                }
            }
            Op::Relu(x) => {
                if self.wants(*x) {
                    let mut d = g.clone();
                    for (v, &y) in d.data_mut().iter_mut().zip(node.value.data()) {
                        if y <= 0.0 {
                            *v = 0.0;
                        }
                    }
                    accumulate(&mut grads[*x], d);
                }
            }
            Op::Softmax(x) => {
                if self.wants(*x) {
                    let y = &node.value;
                    let c = y.cols();
                    let mut d = vec![0.0; y.len()];
                    for ((yr, gr), dr) in y.data().chunks(c).zip(g.data().chunks(c)).zip(d.chunks_mut(c)) {
                        let s = super::dot(yr, gr);
                        for j in 0..c {
                            dr[j] = yr[j] * (gr[j] - s);
                        }
                    }
                    accumulate(&mut grads[*x], Tensor::from_parts(y.shape().to_vec(), d));
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                let d = g.cols();
                let gv = val(*gain).data();
                if self.wants(*gain) || self.wants(*bias) {
                    let mut dg = vec![0.0; d];
                    let mut db = vec![0.0; d];
                    for (gr, hr) in g.data().chunks(d).zip(xhat.chunks(d)) {
                        for j in 0..d {
                            dg[j] += gr[j] * hr[j];
                            db[j] += gr[j];
                        }
                    }
                    if self.wants(*gain) {
                        accumulate(&mut grads[*gain], Tensor::from_parts(vec![d], dg));
                    }
                    if self.wants(*bias) {
                        accumulate(&mut grads[*bias], Tensor::from_parts(vec![d], db));
                    }
                }
                if self.wants(*x) {
                    let mut dx = vec![0.0; g.len()];
                    let inv_d = 1.0 / d as f64;
                    for r in 0..g.rows() {
                        let gr = &g.data()[r * d..(r + 1) * d];
                        let hr = &xhat[r * d..(r + 1) * d];
                        let mut mean_dh = 0.0;
                        let mut mean_dh_h = 0.0;
                        for j in 0..d {
                            let dh = gr[j] * gv[j];
                            mean_dh += dh;
                            mean_dh_h += dh * hr[j];
                        }
                        mean_dh *= inv_d;
                        mean_dh_h *= inv_d;
                        for j in 0..d {
                            let dh = gr[j] * gv[j];
                            dx[r * d + j] = rstd[r] * (dh - mean_dh - hr[j] * mean_dh_h);
                        }
                    }
                    accumulate(&mut grads[*x], Tensor::from_parts(g.shape().to_vec(), dx));
                }
            }
            Op::Embedding { table, ids } => {
                if self.wants(*table) {
                    let tv = val(*table);
                    let d = tv.cols();
                    let mut dt = Tensor::zeros(tv.shape());
                    for (r, &id) in ids.iter().enumerate() {
                        axpy(1.0, &g.data()[r * d..(r + 1) * d], &mut dt.data_mut()[id * d..(id + 1) * d]);
                    }
                    accumulate(&mut grads[*table], dt);
                }
            }
            Op::SliceCols { x, start } => {
                if self.wants(*x) {
                    let xv = val(*x);
                    let (c, w) = (xv.cols(), g.cols());
                    let mut d = Tensor::zeros(xv.shape());
                    for (r, gr) in g.data().chunks(w).enumerate() {
                        d.data_mut()[r * c + start..r * c + start + w].copy_from_slice(gr);
                    }
                    accumulate(&mut grads[*x], d);
                }
            }
            Op::ConcatCols(parts) => {
                let total = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = val(p).cols();
                    if self.wants(p) {
                        let mut d = Vec::with_capacity(g.rows() * w);
                        for row in g.data().chunks(total) {
                            d.extend_from_slice(&row[offset..offset + w]);
                        }
                        accumulate(&mut grads[p], Tensor::from_parts(val(p).shape().to_vec(), d));
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(a, b) => {
                let split = val(*a).len();
                if self.wants(*a) {
                    let d = g.data()[..split].to_vec();
                    accumulate(&mut grads[*a], Tensor::from_parts(val(*a).shape().to_vec(), d));
                }
                if self.wants(*b) {
                    let d = g.data()[split..].to_vec();
                    accumulate(&mut grads[*b], Tensor::from_parts(val(*b).shape().to_vec(), d));
                }
            }
            Op::MulConst(x, c) => {
                if self.wants(*x) {
                    let mut d = g.clone();
                    for (v, m) in d.data_mut().iter_mut().zip(c.data()) {
                        *v *= m;
                    }
                    accumulate(&mut grads[*x], d);
                }
            }
            Op::AddConst(x) => {
                if self.wants(*x) {
                    accumulate(&mut grads[*x], g.clone());
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                weights,
                denom,
                probs,
            } => {
                if self.wants(*logits) {
                    let upstream = g.item();
                    let v = probs.cols();
                    let mut d = probs.clone();
                    for (r, row) in d.data_mut().chunks_mut(v).enumerate() {
                        let scale = upstream * weights[r] / denom;
                        if scale == 0.0 {
                            row.iter_mut().for_each(|x| *x = 0.0);
                            continue;
                        }
                        row[targets[r]] -= 1.0;
                        row.iter_mut().for_each(|x| *x *= scale);
                    }
                    accumulate(&mut grads[*logits], d);
                }
            }
            Op::Sum(x) => {
                if self.wants(*x) {
                    accumulate(&mut grads[*x], Tensor::full(val(*x).shape(), g.item()));
                }
            }
        }
    }
}
