//! Tape-based reverse-mode differentiation.
//!
//! A [`Tape`] records every primitive application in topological order.
//! [`Tape::backward`] walks the record once in reverse and accumulates
//! vector-Jacobian products into per-node gradients. One tape per
//! forward pass; models re-bind their parameters as leaves each pass.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul,
    Transpose,
    Add,
    AddRow,
    Mul,
    Sub,
    Scale(f64),
    ConcatCols,
    ConcatRows,
    SliceCols { start: usize, end: usize },
    Sigmoid,
    Tanh,
    Softmax,
    Log,
    Sum,
    Mean,
    Embedding { indices: Vec<usize> },
    PickNll { targets: Vec<usize>, weights: Vec<f64> },
    BceWithLogits { labels: Vec<f64>, weights: Vec<f64> },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul => "matmul",
            Op::Transpose => "transpose",
            Op::Add => "add",
            Op::AddRow => "add_row",
            Op::Mul => "mul",
            Op::Sub => "sub",
            Op::Scale(_) => "scale",
            Op::ConcatCols => "concat_cols",
            Op::ConcatRows => "concat_rows",
            Op::SliceCols { .. } => "slice_cols",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::Softmax => "softmax",
            Op::Log => "log",
            Op::Sum => "sum",
            Op::Mean => "mean",
            Op::Embedding { .. } => "embedding",
            Op::PickNll { .. } => "pick_nll",
            Op::BceWithLogits { .. } => "bce_with_logits",
        }
    }
}

struct Node {
    op: Op,
    inputs: Vec<usize>,
    value: Tensor,
}

/// Gradients per tape node, produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Gradient for `id`, zeros if the node was never reached.
    pub fn take_or_zeros(&mut self, id: NodeId, shape: &[usize]) -> Tensor {
        self.grads[id.0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(shape.to_vec()))
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(primitive: &'static str, details: String) -> Error {
    Error::ShapeMismatch { primitive, details }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, inputs: Vec<usize>, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, inputs, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Record an input tensor. Leaves participate in backward like any
    /// other node; the caller decides which leaf ids are parameters.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, vec![], value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (n, k) = (ta.rows(), ta.cols());
        let (k2, m) = (tb.rows(), tb.cols());
        if k != k2 {
            return Err(shape_err(
                "matmul",
                format!("[{n}x{k}] x [{k2}x{m}] inner dims differ"),
            ));
        }
        let mut out = vec![0.0; n * m];
        let (da, db) = (ta.data(), tb.data());
        for i in 0..n {
            for p in 0..k {
                let av = da[i * k + p];
                if av == 0.0 {
                    continue;
                }
                let brow = &db[p * m..(p + 1) * m];
                let orow = &mut out[i * m..(i + 1) * m];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
        Ok(self.push(Op::MatMul, vec![a.0, b.0], Tensor::new(vec![n, m], out)?))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let ta = self.value(a);
        let (n, m) = (ta.rows(), ta.cols());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = ta.data()[i * m + j];
            }
        }
        Ok(self.push(Op::Transpose, vec![a.0], Tensor::new(vec![m, n], out)?))
    }

    fn elementwise_pair(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(
                name,
                format!("{:?} vs {:?}", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(op, vec![a.0, b.0], value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise_pair("add", a, b, |x, y| x + y, Op::Add)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise_pair("sub", a, b, |x, y| x - y, Op::Sub)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise_pair("mul", a, b, |x, y| x * y, Op::Mul)
    }

    /// Broadcast-add a bias row to every row of a matrix.
    pub fn add_row(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let (n, d) = (tx.rows(), tx.cols());
        if tb.len() != d {
            return Err(shape_err(
                "add_row",
                format!("matrix cols {d} vs bias len {}", tb.len()),
            ));
        }
        let mut out = tx.data().to_vec();
        for i in 0..n {
            for j in 0..d {
                out[i * d + j] += tb.data()[j];
            }
        }
        Ok(self.push(Op::AddRow, vec![x.0, bias.0], Tensor::new(vec![n, d], out)?))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| c * x).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(Op::Scale(c), vec![a.0], value))
    }

    /// Concatenate two matrices with equal row counts along columns.
    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (n, p) = (ta.rows(), ta.cols());
        let (n2, q) = (tb.rows(), tb.cols());
        if n != n2 {
            return Err(shape_err(
                "concat_cols",
                format!("row counts {n} vs {n2}"),
            ));
        }
        let mut out = Vec::with_capacity(n * (p + q));
        for i in 0..n {
            out.extend_from_slice(ta.row_slice(i));
            out.extend_from_slice(tb.row_slice(i));
        }
        Ok(self.push(
            Op::ConcatCols,
            vec![a.0, b.0],
            Tensor::new(vec![n, p + q], out)?,
        ))
    }

    /// Stack matrices with equal column counts along rows.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::contract("concat_rows requires at least one input"));
        }
        let d = self.value(parts[0]).cols();
        let mut total = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != d {
                return Err(shape_err(
                    "concat_rows",
                    format!("column counts {} vs {d}", t.cols()),
                ));
            }
            total += t.rows();
        }
        let mut out = Vec::with_capacity(total * d);
        for &p in parts {
            out.extend_from_slice(self.value(p).data());
        }
        Ok(self.push(
            Op::ConcatRows,
            parts.iter().map(|p| p.0).collect(),
            Tensor::new(vec![total, d], out)?,
        ))
    }

    /// Column range `[start, end)` of a matrix.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        let ta = self.value(a);
        let (n, d) = (ta.rows(), ta.cols());
        if start >= end || end > d {
            return Err(shape_err(
                "slice_cols",
                format!("range {start}..{end} of {d} columns"),
            ));
        }
        let w = end - start;
        let mut out = Vec::with_capacity(n * w);
        for i in 0..n {
            out.extend_from_slice(&ta.row_slice(i)[start..end]);
        }
        Ok(self.push(
            Op::SliceCols { start, end },
            vec![a.0],
            Tensor::new(vec![n, w], out)?,
        ))
    }

    fn elementwise_unary(
        &mut self,
        a: NodeId,
        f: impl Fn(f64) -> f64,
        op: Op,
    ) -> Result<NodeId> {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(op, vec![a.0], value))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.elementwise_unary(a, sigmoid, Op::Sigmoid)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.elementwise_unary(a, f64::tanh, Op::Tanh)
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        if self.value(a).data().iter().any(|&x| x <= 0.0) {
            return Err(shape_err("log", "input has non-positive values".into()));
        }
        self.elementwise_unary(a, f64::ln, Op::Log)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let ta = self.value(a);
        let (n, d) = (ta.rows(), ta.cols());
        let mut out = Vec::with_capacity(n * d);
        for i in 0..n {
            let row = ta.row_slice(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            out.extend(exps.iter().map(|&e| e / sum));
        }
        Ok(self.push(
            Op::Softmax,
            vec![a.0],
            Tensor::new(ta.shape().to_vec(), out)?,
        ))
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let s: f64 = self.value(a).data().iter().sum();
        Ok(self.push(Op::Sum, vec![a.0], Tensor::scalar(s)))
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let t = self.value(a);
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        Ok(self.push(Op::Mean, vec![a.0], Tensor::scalar(m)))
    }

    /// Gather rows of an embedding table: table `[V, E]`, output `[n, E]`.
    pub fn embedding(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        let tt = self.value(table);
        let (v, e) = (tt.rows(), tt.cols());
        if indices.is_empty() {
            return Err(Error::contract("embedding lookup with no indices"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= v) {
            return Err(shape_err(
                "embedding",
                format!("index {bad} out of table with {v} rows"),
            ));
        }
        let mut out = Vec::with_capacity(indices.len() * e);
        for &i in indices {
            out.extend_from_slice(tt.row_slice(i));
        }
        Ok(self.push(
            Op::Embedding {
                indices: indices.to_vec(),
            },
            vec![table.0],
            Tensor::new(vec![indices.len(), e], out)?,
        ))
    }

    /// Weighted softmax cross-entropy over rows of a logits matrix:
    /// `sum_i w_i * (logsumexp(z_i) - z_i[t_i])`. Weight 0 masks a row.
    /// This one primitive carries masked MLE, Eq.-style discriminator
    /// objectives, and reward-weighted policy-gradient surrogates.
    pub fn pick_nll(
        &mut self,
        logits: NodeId,
        targets: &[usize],
        weights: &[f64],
    ) -> Result<NodeId> {
        let tl = self.value(logits);
        let (n, v) = (tl.rows(), tl.cols());
        if targets.len() != n || weights.len() != n {
            return Err(shape_err(
                "pick_nll",
                format!(
                    "{n} logit rows vs {} targets, {} weights",
                    targets.len(),
                    weights.len()
                ),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= v) {
            return Err(shape_err(
                "pick_nll",
                format!("target {bad} out of {v} classes"),
            ));
        }
        let mut total = 0.0;
        for i in 0..n {
            if weights[i] == 0.0 {
                continue;
            }
            let row = tl.row_slice(i);
            total += weights[i] * (log_sum_exp(row) - row[targets[i]]);
        }
        Ok(self.push(
            Op::PickNll {
                targets: targets.to_vec(),
                weights: weights.to_vec(),
            },
            vec![logits.0],
            Tensor::scalar(total),
        ))
    }

    /// Weighted binary cross-entropy on raw logits (numerically stable):
    /// `sum_i w_i * (max(z,0) - z*y + ln(1 + exp(-|z|)))`.
    pub fn bce_with_logits(
        &mut self,
        logits: NodeId,
        labels: &[f64],
        weights: &[f64],
    ) -> Result<NodeId> {
        let tl = self.value(logits);
        let n = tl.len();
        if labels.len() != n || weights.len() != n {
            return Err(shape_err(
                "bce_with_logits",
                format!("{n} logits vs {} labels, {} weights", labels.len(), weights.len()),
            ));
        }
        let mut total = 0.0;
        for i in 0..n {
            let z = tl.data()[i];
            total += weights[i] * (z.max(0.0) - z * labels[i] + (-z.abs()).exp().ln_1p());
        }
        Ok(self.push(
            Op::BceWithLogits {
                labels: labels.to_vec(),
                weights: weights.to_vec(),
            },
            vec![logits.0],
            Tensor::scalar(total),
        ))
    }

    /// Reverse pass from a scalar loss node. Returns a gradient slot per
    /// node; untouched nodes keep `None`.
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            {
                // propagate into inputs
                let node = &self.nodes[idx];
                if !matches!(node.op, Op::Leaf) {
                    self.propagate(idx, &g, &mut grads)?;
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(
        &self,
        idx: usize,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<()> {
        let node = &self.nodes[idx];
        let input = |k: usize| &self.nodes[node.inputs[k]].value;
        let mut acc = |k: usize, delta: Tensor| {
            let slot = &mut grads[node.inputs[k]];
            match slot {
                Some(t) => {
                    for (a, b) in t.data_mut().iter_mut().zip(delta.data()) {
                        *a += b;
                    }
                }
                None => *slot = Some(delta),
            }
        };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul => {
                let (a, b) = (input(0), input(1));
                let (n, k, m) = (a.rows(), a.cols(), b.cols());
                // dA = g . B^T
                let mut da = vec![0.0; n * k];
                for i in 0..n {
                    for j in 0..m {
                        let gv = g.data()[i * m + j];
                        if gv == 0.0 {
                            continue;
                        }
                        for p in 0..k {
                            da[i * k + p] += gv * b.data()[p * m + j];
                        }
                    }
                }
                // dB = A^T . g
                let mut db = vec![0.0; k * m];
                for i in 0..n {
                    for p in 0..k {
                        let av = a.data()[i * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        let grow = &g.data()[i * m..(i + 1) * m];
                        let drow = &mut db[p * m..(p + 1) * m];
                        for (d, &gv) in drow.iter_mut().zip(grow) {
                            *d += av * gv;
                        }
                    }
                }
                acc(0, Tensor::new(vec![n, k], da)?);
                acc(1, Tensor::new(vec![k, m], db)?);
            }
            Op::Transpose => {
                let (m, n) = (g.rows(), g.cols());
                let mut d = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        d[j * m + i] = g.data()[i * n + j];
                    }
                }
                acc(0, Tensor::new(vec![n, m], d)?);
            }
            Op::Add => {
                acc(0, g.clone());
                acc(1, g.clone());
            }
            Op::Sub => {
                acc(0, g.clone());
                let neg = g.data().iter().map(|&x| -x).collect();
                acc(1, Tensor::new(g.shape().to_vec(), neg)?);
            }
            Op::Mul => {
                let (a, b) = (input(0), input(1));
                let da = g.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
                let db = g.data().iter().zip(a.data()).map(|(&x, &y)| x * y).collect();
                acc(0, Tensor::new(g.shape().to_vec(), da)?);
                acc(1, Tensor::new(g.shape().to_vec(), db)?);
            }
            Op::AddRow => {
                let bias = input(1);
                let (n, d) = (g.rows(), g.cols());
                acc(0, g.clone());
                let mut db = vec![0.0; d];
                for i in 0..n {
                    for j in 0..d {
                        db[j] += g.data()[i * d + j];
                    }
                }
                acc(1, Tensor::new(bias.shape().to_vec(), db)?);
            }
            Op::Scale(c) => {
                let d = g.data().iter().map(|&x| c * x).collect();
                acc(0, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::ConcatCols => {
                let (a, b) = (input(0), input(1));
                let (n, p, q) = (a.rows(), a.cols(), b.cols());
                let mut da = Vec::with_capacity(n * p);
                let mut db = Vec::with_capacity(n * q);
                for i in 0..n {
                    let row = g.row_slice(i);
                    da.extend_from_slice(&row[..p]);
                    db.extend_from_slice(&row[p..]);
                }
                acc(0, Tensor::new(vec![n, p], da)?);
                acc(1, Tensor::new(vec![n, q], db)?);
            }
            Op::ConcatRows => {
                let d = g.cols();
                let mut offset = 0;
                for k in 0..node.inputs.len() {
                    let r = input(k).rows();
                    let part = g.data()[offset * d..(offset + r) * d].to_vec();
                    acc(k, Tensor::new(vec![r, d], part)?);
                    offset += r;
                }
            }
            Op::SliceCols { start, end } => {
                let a = input(0);
                let (n, d) = (a.rows(), a.cols());
                let w = end - start;
                let mut da = vec![0.0; n * d];
                for i in 0..n {
                    for j in 0..w {
                        da[i * d + start + j] = g.data()[i * w + j];
                    }
                }
                acc(0, Tensor::new(vec![n, d], da)?);
            }
            Op::Sigmoid => {
                let y = &node.value;
                let d = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gv, &yv)| gv * yv * (1.0 - yv))
                    .collect();
                acc(0, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::Tanh => {
                let y = &node.value;
                let d = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gv, &yv)| gv * (1.0 - yv * yv))
                    .collect();
                acc(0, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::Softmax => {
                let y = &node.value;
                let (n, d) = (y.rows(), y.cols());
                let mut out = vec![0.0; n * d];
                for i in 0..n {
                    let yrow = y.row_slice(i);
                    let grow = &g.data()[i * d..(i + 1) * d];
                    let dot: f64 = yrow.iter().zip(grow).map(|(&a, &b)| a * b).sum();
                    for j in 0..d {
                        out[i * d + j] = yrow[j] * (grow[j] - dot);
                    }
                }
                acc(0, Tensor::new(y.shape().to_vec(), out)?);
            }
            Op::Log => {
                let x = input(0);
                let d = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(&gv, &xv)| gv / xv)
                    .collect();
                acc(0, Tensor::new(g.shape().to_vec(), d)?);
            }
            Op::Sum => {
                let x = input(0);
                let gv = g.scalar_value();
                acc(0, Tensor::new(x.shape().to_vec(), vec![gv; x.len()])?);
            }
            Op::Mean => {
                let x = input(0);
                let gv = g.scalar_value() / x.len() as f64;
                acc(0, Tensor::new(x.shape().to_vec(), vec![gv; x.len()])?);
            }
            Op::Embedding { indices } => {
                let table = input(0);
                let (v, e) = (table.rows(), table.cols());
                let mut dt = vec![0.0; v * e];
                for (r, &i) in indices.iter().enumerate() {
                    let grow = &g.data()[r * e..(r + 1) * e];
                    let trow = &mut dt[i * e..(i + 1) * e];
                    for (t, &gv) in trow.iter_mut().zip(grow) {
                        *t += gv;
                    }
                }
                acc(0, Tensor::new(vec![v, e], dt)?);
            }
            Op::PickNll { targets, weights } => {
                let logits = input(0);
                let (n, v) = (logits.rows(), logits.cols());
                let gv = g.scalar_value();
                let mut d = vec![0.0; n * v];
                for i in 0..n {
                    let w = weights[i];
                    if w == 0.0 {
                        continue;
                    }
                    let row = logits.row_slice(i);
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = row.iter().map(|&z| (z - max).exp()).collect();
                    let sum: f64 = exps.iter().sum();
                    for j in 0..v {
                        d[i * v + j] = gv * w * (exps[j] / sum);
                    }
                    d[i * v + targets[i]] -= gv * w;
                }
                acc(0, Tensor::new(vec![n, v], d)?);
            }
            Op::BceWithLogits { labels, weights } => {
                let logits = input(0);
                let gv = g.scalar_value();
                let d = logits
                    .data()
                    .iter()
                    .zip(labels.iter().zip(weights))
                    .map(|(&z, (&y, &w))| gv * w * (sigmoid(z) - y))
                    .collect();
                acc(0, Tensor::new(logits.shape().to_vec(), d)?);
            }
        }

        // every primitive keeps finite values finite
        debug_assert!(
            node.inputs
                .iter()
                .all(|&i| grads[i].as_ref().map_or(true, |t| t.all_finite())),
            "non-finite gradient out of {}",
            node.op.name()
        );
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

/// Log-softmax of one logits row evaluated at `target`. Shared by the
/// sampling and scoring paths so their emitted values agree bit-exactly.
pub fn log_softmax_pick(row: &[f64], target: usize) -> f64 {
    row[target] - log_sum_exp(row)
}
