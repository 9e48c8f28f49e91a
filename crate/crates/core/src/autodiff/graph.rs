//! Reverse-mode differentiation over an append-only graph.
//!
//! Nodes are stored in creation order, which is a valid topological order;
//! `backward` replays them in reverse. Every operation checks shapes up
//! front and returns an error instead of broadcasting.

use super::tensor::{softmax_rows, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of one [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Kind of operation that produced a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpTag {
    Leaf,
    MatMul,
    AddBias,
    Relu,
    Pow,
    MaskedMeanRows,
    L2NormDiff,
    SoftmaxCrossEntropy,
    ConcatCols,
    SliceCols,
    Add,
    Mul,
    Scale,
    Sum,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul,
    AddBias,
    Relu,
    Pow(u32),
    MaskedMeanRows { mask: Vec<bool>, count: usize },
    L2NormDiff,
    SoftmaxCrossEntropy { labels: Vec<usize>, probs: Tensor },
    ConcatCols { widths: Vec<usize> },
    SliceCols { start: usize },
    Add,
    Mul,
    Scale(f64),
    Sum,
}

impl Op {
    fn tag(&self) -> OpTag {
        match self {
            Op::Leaf => OpTag::Leaf,
            Op::MatMul => OpTag::MatMul,
            Op::AddBias => OpTag::AddBias,
            Op::Relu => OpTag::Relu,
            Op::Pow(_) => OpTag::Pow,
            Op::MaskedMeanRows { .. } => OpTag::MaskedMeanRows,
            Op::L2NormDiff => OpTag::L2NormDiff,
            Op::SoftmaxCrossEntropy { .. } => OpTag::SoftmaxCrossEntropy,
            Op::ConcatCols { .. } => OpTag::ConcatCols,
            Op::SliceCols { .. } => OpTag::SliceCols,
            Op::Add => OpTag::Add,
            Op::Mul => OpTag::Mul,
            Op::Scale(_) => OpTag::Scale,
            Op::Sum => OpTag::Sum,
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    parents: Vec<Var>,
    value: Tensor,
    requires_grad: bool,
    adjoint: Option<Tensor>,
}

/// A differentiation graph. One graph per forward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds an input tensor.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { op: Op::Leaf, parents: Vec::new(), value, requires_grad, adjoint: None });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Adjoint of `v` after [`Graph::backward`]; `None` for nodes that do not
    /// require gradients or are not reachable from the loss.
    pub fn adjoint(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].adjoint.as_ref()
    }

    pub fn op_tag(&self, v: Var) -> OpTag {
        self.nodes[v.0].op.tag()
    }

    pub fn parents(&self, v: Var) -> &[Var] {
        &self.nodes[v.0].parents
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op: Op, parents: Vec<Var>, value: Tensor) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node { op, parents, value, requires_grad, adjoint: None });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, p) = ta.require_matrix("matmul")?;
        let (p2, q) = tb.require_matrix("matmul")?;
        if p != p2 {
            return Err(Error::shape(
                "matmul",
                format!("cannot multiply {:?} by {:?}", ta.shape(), tb.shape()),
            ));
        }
        let out = matmul_raw(ta.data(), tb.data(), m, p, q);
        let value = Tensor::new(vec![m, q], out)?;
        Ok(self.push(Op::MatMul, vec![a, b], value))
    }

    /// Adds a bias vector of length `q` to every row of a `B×q` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        let (rows, cols) = tx.require_matrix("add_bias")?;
        if tb.shape() != [cols] {
            return Err(Error::shape(
                "add_bias",
                format!("bias {:?} does not match input {:?}", tb.shape(), tx.shape()),
            ));
        }
        let mut out = tx.data().to_vec();
        for r in 0..rows {
            for (o, b) in out[r * cols..(r + 1) * cols].iter_mut().zip(tb.data()) {
                *o += b;
            }
        }
        let value = Tensor::new(vec![rows, cols], out)?;
        Ok(self.push(Op::AddBias, vec![x, bias], value))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| v.max(0.0)).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        self.push(Op::Relu, vec![x], value)
    }

    /// Raises each entry to the integer power `k ≥ 1`.
    pub fn pow(&mut self, x: Var, k: u32) -> Result<Var> {
        if k == 0 {
            return Err(Error::invalid("elementwise power requires k >= 1"));
        }
        let t = self.value(x);
        let data = t.data().iter().map(|&v| v.powi(k as i32)).collect();
        let value = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(Op::Pow(k), vec![x], value))
    }

    /// Mean of the rows of a `B×d` matrix selected by `mask`.
    pub fn masked_mean_rows(&mut self, m: Var, mask: &[bool]) -> Result<Var> {
        let t = self.value(m);
        let (rows, cols) = t.require_matrix("masked_mean_rows")?;
        if mask.len() != rows {
            return Err(Error::shape(
                "masked_mean_rows",
                format!("mask of length {} for {rows} rows", mask.len()),
            ));
        }
        let count = mask.iter().filter(|&&s| s).count();
        if count == 0 {
            return Err(Error::EmptyClass { op: "masked_mean_rows" });
        }
        let mut out = vec![0.0; cols];
        for (r, _) in mask.iter().enumerate().filter(|(_, &s)| s) {
            for (o, v) in out.iter_mut().zip(t.row(r)) {
                *o += v;
            }
        }
        let inv = 1.0 / count as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        let value = Tensor::vector(out);
        Ok(self.push(Op::MaskedMeanRows { mask: mask.to_vec(), count }, vec![m], value))
    }

    /// Euclidean norm of `a − b` as a scalar.
    pub fn l2_norm_diff(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape("l2_norm_diff", format!("{:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let norm = ta.data().iter().zip(tb.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        Ok(self.push(Op::L2NormDiff, vec![a, b], Tensor::scalar(norm)))
    }

    /// Batch mean of `−log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        let (rows, classes) = t.require_matrix("softmax_cross_entropy")?;
        if rows == 0 {
            return Err(Error::invalid("softmax_cross_entropy on an empty batch"));
        }
        if labels.len() != rows {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{} labels for {rows} rows", labels.len()),
            ));
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::Label { row, label, classes });
        }
        let mut total = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = t.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[label];
        }
        let probs = softmax_rows(t);
        let value = Tensor::scalar(total / rows as f64);
        Ok(self.push(Op::SoftmaxCrossEntropy { labels: labels.to_vec(), probs }, vec![logits], value))
    }

    /// Column-wise concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::invalid("concat_cols needs at least one part"));
        };
        let (rows, _) = self.value(first).require_matrix("concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).require_matrix("concat_cols")?;
            if r != rows {
                return Err(Error::shape("concat_cols", format!("part has {r} rows, expected {rows}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::new(vec![rows, total], out)?;
        Ok(self.push(Op::ConcatCols { widths }, parts.to_vec(), value))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(x);
        let (rows, cols) = t.require_matrix("slice_cols")?;
        if start >= end || end > cols {
            return Err(Error::shape(
                "slice_cols",
                format!("range {start}..{end} out of bounds for {cols} columns"),
            ));
        }
        let mut out = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            out.extend_from_slice(&t.row(r)[start..end]);
        }
        let value = Tensor::new(vec![rows, end - start], out)?;
        Ok(self.push(Op::SliceCols { start }, vec![x], value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same_shape("add", a, b, |x, y| x + y)?;
        Ok(self.push(Op::Add, vec![a, b], value))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same_shape("mul", a, b, |x, y| x * y)?;
        Ok(self.push(Op::Mul, vec![a, b], value))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        self.push(Op::Scale(factor), vec![x], value)
    }

    /// Sum of all entries as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Op::Sum, vec![x], Tensor::scalar(s))
    }

    /// Sum of a list of same-shaped tensors; `None` when the list is empty.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Option<Var>> {
        let mut iter = terms.iter().copied();
        let Some(mut acc) = iter.next() else {
            return Ok(None);
        };
        for t in iter {
            acc = self.add(acc, t)?;
        }
        Ok(Some(acc))
    }

    fn zip_same_shape(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape(op, format!("{:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    /// Computes adjoints of every node that requires gradients with respect to
    /// the scalar `loss`. Previous adjoints are discarded.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.value(loss).shape()),
            ));
        }
        for node in &mut self.nodes {
            node.adjoint = None;
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let shape = self.value(loss).shape().to_vec();
        self.nodes[loss.0].adjoint = Some(Tensor::new(shape, vec![1.0])?);

        for idx in (0..=loss.0).rev() {
            let Some(up) = self.nodes[idx].adjoint.take() else {
                continue;
            };
            let contributions = self.local_gradients(idx, &up);
            self.nodes[idx].adjoint = Some(up);
            for (parent, grad) in contributions {
                let node = &mut self.nodes[parent.0];
                if !node.requires_grad {
                    continue;
                }
                match &mut node.adjoint {
                    Some(acc) => {
                        for (a, g) in acc.data_mut().iter_mut().zip(grad.data()) {
                            *a += g;
                        }
                    }
                    None => node.adjoint = Some(grad),
                }
            }
        }
        Ok(())
    }

    /// Vector-Jacobian products of node `idx` for each parent.
    fn local_gradients(&self, idx: usize, up: &Tensor) -> Vec<(Var, Tensor)> {
        let node = &self.nodes[idx];
        let p = &node.parents;
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        let u = up.data();
        match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul => {
                let (a, b) = (val(p[0]), val(p[1]));
                let (m, k) = (a.shape()[0], a.shape()[1]);
                let q = b.shape()[1];
                let mut out = Vec::new();
                if wants(p[0]) {
                    // dA = dC · Bᵀ
                    let mut da = vec![0.0; m * k];
                    for i in 0..m {
                        for j in 0..k {
                            let brow = &b.data()[j * q..(j + 1) * q];
                            let urow = &u[i * q..(i + 1) * q];
                            da[i * k + j] = urow.iter().zip(brow).map(|(x, y)| x * y).sum();
                        }
                    }
                    out.push((p[0], Tensor::new(vec![m, k], da).unwrap()));
                }
                if wants(p[1]) {
                    // dB = Aᵀ · dC
                    let mut db = vec![0.0; k * q];
                    for i in 0..m {
                        let urow = &u[i * q..(i + 1) * q];
                        for j in 0..k {
                            let aij = a.data()[i * k + j];
                            if aij == 0.0 {
                                continue;
                            }
                            for (d, &g) in db[j * q..(j + 1) * q].iter_mut().zip(urow) {
                                *d += aij * g;
                            }
                        }
                    }
                    out.push((p[1], Tensor::new(vec![k, q], db).unwrap()));
                }
                out
            }
            Op::AddBias => {
                let cols = val(p[1]).numel();
                let mut db = vec![0.0; cols];
                for row in u.chunks(cols.max(1)) {
                    for (d, g) in db.iter_mut().zip(row) {
                        *d += g;
                    }
                }
                vec![(p[0], up.clone()), (p[1], Tensor::vector(db))]
            }
            Op::Relu => {
                let x = val(p[0]);
                let data = x.data().iter().zip(u).map(|(&xv, &g)| if xv > 0.0 { g } else { 0.0 }).collect();
                vec![(p[0], Tensor::new(x.shape().to_vec(), data).unwrap())]
            }
            Op::Pow(k) => {
                let x = val(p[0]);
                let kf = *k as f64;
                let data = x.data().iter().zip(u).map(|(&xv, &g)| kf * xv.powi(*k as i32 - 1) * g).collect();
                vec![(p[0], Tensor::new(x.shape().to_vec(), data).unwrap())]
            }
            Op::MaskedMeanRows { mask, count } => {
                let x = val(p[0]);
                let cols = x.cols();
                let inv = 1.0 / *count as f64;
                let mut data = vec![0.0; x.numel()];
                for (r, _) in mask.iter().enumerate().filter(|(_, &s)| s) {
                    for (d, g) in data[r * cols..(r + 1) * cols].iter_mut().zip(u) {
                        *d = g * inv;
                    }
                }
                vec![(p[0], Tensor::new(x.shape().to_vec(), data).unwrap())]
            }
            Op::L2NormDiff => {
                let (a, b) = (val(p[0]), val(p[1]));
                let norm = node.value.item();
                let g = u[0];
                let da: Vec<f64> = if norm > 0.0 {
                    a.data().iter().zip(b.data()).map(|(x, y)| g * (x - y) / norm).collect()
                } else {
                    vec![0.0; a.numel()]
                };
                let db = da.iter().map(|v| -v).collect();
                vec![
                    (p[0], Tensor::new(a.shape().to_vec(), da).unwrap()),
                    (p[1], Tensor::new(b.shape().to_vec(), db).unwrap()),
                ]
            }
            Op::SoftmaxCrossEntropy { labels, probs } => {
                let rows = labels.len();
                let cols = probs.cols();
                let scale = u[0] / rows as f64;
                let mut data = probs.data().to_vec();
                for (r, &l) in labels.iter().enumerate() {
                    data[r * cols + l] -= 1.0;
                }
                data.iter_mut().for_each(|d| *d *= scale);
                vec![(p[0], Tensor::new(probs.shape().to_vec(), data).unwrap())]
            }
            Op::ConcatCols { widths } => {
                let total: usize = widths.iter().sum();
                let rows = node.value.rows();
                let mut offset = 0;
                let mut out = Vec::with_capacity(widths.len());
                for (&part, &w) in p.iter().zip(widths) {
                    let mut data = Vec::with_capacity(rows * w);
                    for r in 0..rows {
                        data.extend_from_slice(&u[r * total + offset..r * total + offset + w]);
                    }
                    out.push((part, Tensor::new(vec![rows, w], data).unwrap()));
                    offset += w;
                }
                out
            }
            Op::SliceCols { start } => {
                let x = val(p[0]);
                let (rows, cols) = (x.rows(), x.cols());
                let w = node.value.cols();
                let mut data = vec![0.0; rows * cols];
                for r in 0..rows {
                    data[r * cols + start..r * cols + start + w].copy_from_slice(&u[r * w..(r + 1) * w]);
                }
                vec![(p[0], Tensor::new(x.shape().to_vec(), data).unwrap())]
            }
            Op::Add => vec![(p[0], up.clone()), (p[1], up.clone())],
            Op::Mul => {
                let (a, b) = (val(p[0]), val(p[1]));
                let da = b.data().iter().zip(u).map(|(x, g)| x * g).collect();
                let db = a.data().iter().zip(u).map(|(x, g)| x * g).collect();
                vec![
                    (p[0], Tensor::new(a.shape().to_vec(), da).unwrap()),
                    (p[1], Tensor::new(b.shape().to_vec(), db).unwrap()),
                ]
            }
            Op::Scale(f) => {
                let data = u.iter().map(|g| g * f).collect();
                vec![(p[0], Tensor::new(up.shape().to_vec(), data).unwrap())]
            }
            Op::Sum => {
                let x = val(p[0]);
                vec![(p[0], Tensor::new(x.shape().to_vec(), vec![u[0]; x.numel()]).unwrap())]
            }
        }
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, p: usize, q: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * q];
    for i in 0..m {
        let orow = &mut out[i * q..(i + 1) * q];
        for k in 0..p {
            let aik = a[i * p + k];
            if aik == 0.0 {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(&b[k * q..(k + 1) * q]) {
                *o += aik * bv;
            }
        }
    }
    out
}
