//! Define-by-run reverse-mode differentiation over dense 2-D tensors.
//!
//! A [`Tape`] is rebuilt for every forward pass. Each primitive appends one
//! node holding its output value and enough context for its vector-Jacobian
//! product; nodes only ever reference earlier nodes, so the tape is always in
//! topological order and [`Tape::backward`] is a single reverse sweep.
//!
//! `backward` borrows the tape immutably. Calling it twice on the same loss
//! returns identical gradients.

use crate::error::{shape_err, Error, Result};
use crate::tensor::{gemm, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    ElemMul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Relu(Var),
    GatherRows { x: Var, idx: Vec<usize> },
    ScatterRows { x: Var, idx: Vec<usize> },
    ScaleRows { x: Var, s: Var },
    DivScalar { x: Var, s: Var },
    Norm { x: Var, floored: bool },
    Sum(Var),
    SumSquares(Var),
    MeanRows(Var),
    ConcatCols(Var, Var),
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Vec<(usize, usize)>,
        probs: Tensor,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::ElemMul(..) => "elem_mul",
            Op::Scale(..) => "scale",
            Op::Sigmoid(..) => "sigmoid",
            Op::Relu(..) => "relu",
            Op::GatherRows { .. } => "gather_rows",
            Op::ScatterRows { .. } => "scatter_rows",
            Op::ScaleRows { .. } => "scale_rows",
            Op::DivScalar { .. } => "div_scalar",
            Op::Norm { .. } => "norm",
            Op::Sum(..) => "sum",
            Op::SumSquares(..) => "sum_squares",
            Op::MeanRows(..) => "mean_rows",
            Op::ConcatCols(..) => "concat_cols",
            Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Lower bound applied by [`Tape::norm_floored`].
pub const NORM_FLOOR: f64 = 1e-12;

/// Records operations for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Option<&'static str>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` when `v` does not require a gradient.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`; panics if `v` was not a gradient-tracking node.
    pub fn wrt(&self, v: Var) -> &Tensor {
        self.get(v).expect("variable does not require grad")
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

    /// Scales the backward rule of every `op_name` node by 1.5. Only for
    /// negative-control tests of the gradient checker.
    #[doc(hidden)]
    pub fn inject_fault(&mut self, op_name: &'static str) {
        self.fault = Some(op_name);
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

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_with(self.value(b), "add", |x, y| x + y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn elem_mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).zip_with(self.value(b), "elem_mul", |x, y| x * y)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::ElemMul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| x * c);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Scale(a, c), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(stable_sigmoid);
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        let rg = self.any_grad(&[a]);
        self.push(out, Op::Relu(a), rg)
    }

    /// Rows `idx` of `x`, in the order given. `idx` must be strictly
    /// increasing and in range.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let src = self.value(x);
        check_indices("gather_rows", idx, src.rows())?;
        let cols = src.cols();
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            data.extend_from_slice(src.row(i));
        }
        let out = Tensor::new(idx.len(), cols, data)?;
        let rg = self.any_grad(&[x]);
        Ok(self.push(out, Op::GatherRows { x, idx: idx.to_vec() }, rg))
    }

    /// An `rows x C` tensor with row `idx[i]` equal to row `i` of `x` and
    /// every other row zero.
    pub fn scatter_rows(&mut self, rows: usize, x: Var, idx: &[usize]) -> Result<Var> {
        let src = self.value(x);
        if src.rows() != idx.len() {
            return shape_err("scatter_rows", src.shape(), (idx.len(), src.cols()));
        }
        check_indices("scatter_rows", idx, rows)?;
        let out = scatter(rows, src, idx);
        let rg = self.any_grad(&[x]);
        Ok(self.push(out, Op::ScatterRows { x, idx: idx.to_vec() }, rg))
    }

    /// Multiplies row `i` of `x` by `s[i]`, with `s` a `k x 1` column.
    pub fn scale_rows(&mut self, x: Var, s: Var) -> Result<Var> {
        let (xv, sv) = (self.value(x), self.value(s));
        if sv.cols() != 1 || sv.rows() != xv.rows() {
            return shape_err("scale_rows", xv.shape(), sv.shape());
        }
        let mut out = xv.clone();
        for r in 0..out.rows() {
            let f = sv.get(r, 0);
            out.row_mut(r).iter_mut().for_each(|v| *v *= f);
        }
        let rg = self.any_grad(&[x, s]);
        Ok(self.push(out, Op::ScaleRows { x, s }, rg))
    }

    /// `x / s` for a `1 x 1` divisor `s`.
    pub fn div_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        let sv = self.value(s);
        if sv.shape() != (1, 1) {
            return shape_err("div_scalar", self.value(x).shape(), sv.shape());
        }
        let d = sv.get(0, 0);
        let out = self.value(x).map(|v| v / d);
        let rg = self.any_grad(&[x, s]);
        Ok(self.push(out, Op::DivScalar { x, s }, rg))
    }

    /// Frobenius norm as a `1 x 1` tensor.
    pub fn norm(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).norm());
        let rg = self.any_grad(&[x]);
        self.push(out, Op::Norm { x, floored: false }, rg)
    }

    /// `max(norm(x), NORM_FLOOR)`; the gradient is zero on the floor.
    pub fn norm_floored(&mut self, x: Var) -> Var {
        let n = self.value(x).norm();
        let out = Tensor::scalar(n.max(NORM_FLOOR));
        let rg = self.any_grad(&[x]);
        self.push(out, Op::Norm { x, floored: n < NORM_FLOOR }, rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        let rg = self.any_grad(&[x]);
        self.push(out, Op::Sum(x), rg)
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum_squares());
        let rg = self.any_grad(&[x]);
        self.push(out, Op::SumSquares(x), rg)
    }

    /// Column means, `N x C -> 1 x C`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rows() == 0 {
            return Err(Error::Validation("mean over zero rows".into()));
        }
        let mut out = Tensor::zeros(1, xv.cols());
        for r in 0..xv.rows() {
            for (o, v) in out.data_mut().iter_mut().zip(xv.row(r)) {
                *o += v;
            }
        }
        let n = xv.rows() as f64;
        out.data_mut().iter_mut().for_each(|v| *v /= n);
        let rg = self.any_grad(&[x]);
        Ok(self.push(out, Op::MeanRows(x), rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return shape_err("concat_cols", av.shape(), bv.shape());
        }
        let cols = av.cols() + bv.cols();
        let mut data = Vec::with_capacity(av.rows() * cols);
        for r in 0..av.rows() {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let out = Tensor::new(av.rows(), cols, data)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::ConcatCols(a, b), rg))
    }

    /// Mean negative log-likelihood of softmax(logits) over the rows in
    /// `targets`, given as `(row, label)` pairs.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[(usize, usize)]) -> Result<Var> {
        if targets.is_empty() {
            return Err(Error::NoLabeledNodes);
        }
        let lv = self.value(logits);
        let (n, k) = lv.shape();
        let mut probs = Tensor::zeros(targets.len(), k);
        let mut total = 0.0;
        for (t, &(row, label)) in targets.iter().enumerate() {
            if row >= n {
                return Err(Error::Index {
                    op: "softmax_cross_entropy",
                    reason: format!("row {row} out of range for {n} rows"),
                });
            }
            if label >= k {
                return Err(Error::Index {
                    op: "softmax_cross_entropy",
                    reason: format!("label {label} out of range for {k} classes"),
                });
            }
            let logit_row = lv.row(row);
            let max = logit_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            let prow = probs.row_mut(t);
            for (p, &l) in prow.iter_mut().zip(logit_row) {
                *p = (l - max).exp();
                z += *p;
            }
            prow.iter_mut().for_each(|p| *p /= z);
            total += z.ln() - (logit_row[label] - max);
        }
        let loss = Tensor::scalar(total / targets.len() as f64);
        let rg = self.any_grad(&[logits]);
        Ok(self.push(
            loss,
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Reverse sweep from a `1 x 1` loss. Every gradient-tracking node gets
    /// an entry; leaves that the loss does not depend on get exact zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let (rows, cols) = self.shape(loss);
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarLoss { rows, cols });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(Tensor::scalar(1.0));
        }
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let g = match self.fault {
                Some(name) if name == node.op.name() => g.map(|v| v * 1.5),
                _ => g,
            };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        for (node, g) in self.nodes.iter().zip(grads.iter_mut()) {
            if node.requires_grad && g.is_none() {
                let (r, c) = node.value.shape();
                *g = Some(Tensor::zeros(r, c));
            } else if !node.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(*a) {
                    accumulate(grads, *a, gemm(g, false, self.value(*b), true));
                }
                if wants(*b) {
                    accumulate(grads, *b, gemm(self.value(*a), true, g, false));
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if wants(v) {
                        accumulate(grads, v, g.clone());
                    }
                }
            }
            Op::ElemMul(a, b) => {
                if wants(*a) {
                    let ga = g.zip_with(self.value(*b), "elem_mul", |x, y| x * y).unwrap();
                    accumulate(grads, *a, ga);
                }
                if wants(*b) {
                    let gb = g.zip_with(self.value(*a), "elem_mul", |x, y| x * y).unwrap();
                    accumulate(grads, *b, gb);
                }
            }
            Op::Scale(a, c) => accumulate(grads, *a, g.map(|v| v * c)),
            Op::Sigmoid(a) => {
                let ga = g
                    .zip_with(&node.value, "sigmoid", |gv, s| gv * s * (1.0 - s))
                    .unwrap();
                accumulate(grads, *a, ga);
            }
            Op::Relu(a) => {
                let ga = g
                    .zip_with(self.value(*a), "relu", |gv, x| if x > 0.0 { gv } else { 0.0 })
                    .unwrap();
                accumulate(grads, *a, ga);
            }
            Op::GatherRows { x, idx } => {
                accumulate(grads, *x, scatter(self.value(*x).rows(), g, idx));
            }
            Op::ScatterRows { x, idx } => {
                let mut gx = Tensor::zeros(idx.len(), g.cols());
                for (r, &i) in idx.iter().enumerate() {
                    gx.row_mut(r).copy_from_slice(g.row(i));
                }
                accumulate(grads, *x, gx);
            }
            Op::ScaleRows { x, s } => {
                let (xv, sv) = (self.value(*x), self.value(*s));
                if wants(*x) {
                    let mut gx = g.clone();
                    for r in 0..gx.rows() {
                        let f = sv.get(r, 0);
                        gx.row_mut(r).iter_mut().for_each(|v| *v *= f);
                    }
                    accumulate(grads, *x, gx);
                }
                if wants(*s) {
                    let mut gs = Tensor::zeros(sv.rows(), 1);
                    for r in 0..sv.rows() {
                        let dot: f64 = g.row(r).iter().zip(xv.row(r)).map(|(a, b)| a * b).sum();
                        gs.set(r, 0, dot);
                    }
                    accumulate(grads, *s, gs);
                }
            }
            Op::DivScalar { x, s } => {
                let d = self.value(*s).get(0, 0);
                if wants(*x) {
                    accumulate(grads, *x, g.map(|v| v / d));
                }
                if wants(*s) {
                    let dot: f64 = g.data().iter().zip(self.value(*x).data()).map(|(a, b)| a * b).sum();
                    accumulate(grads, *s, Tensor::scalar(-dot / (d * d)));
                }
            }
            Op::Norm { x, floored } => {
                let xv = self.value(*x);
                let n = node.value.get(0, 0);
                let gv = g.get(0, 0);
                let gx = if *floored || n == 0.0 {
                    Tensor::zeros(xv.rows(), xv.cols())
                } else {
                    xv.map(|v| gv * v / n)
                };
                accumulate(grads, *x, gx);
            }
            Op::Sum(x) => {
                let (r, c) = self.value(*x).shape();
                accumulate(grads, *x, Tensor::filled(r, c, g.get(0, 0)));
            }
            Op::SumSquares(x) => {
                let gv = g.get(0, 0);
                accumulate(grads, *x, self.value(*x).map(|v| 2.0 * gv * v));
            }
            Op::MeanRows(x) => {
                let (r, c) = self.value(*x).shape();
                let mut gx = Tensor::zeros(r, c);
                for i in 0..r {
                    for (o, v) in gx.row_mut(i).iter_mut().zip(g.row(0)) {
                        *o = v / r as f64;
                    }
                }
                accumulate(grads, *x, gx);
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let rows = g.rows();
                if wants(*a) {
                    let mut ga = Tensor::zeros(rows, ca);
                    for r in 0..rows {
                        ga.row_mut(r).copy_from_slice(&g.row(r)[..ca]);
                    }
                    accumulate(grads, *a, ga);
                }
                if wants(*b) {
                    let mut gb = Tensor::zeros(rows, cb);
                    for r in 0..rows {
                        gb.row_mut(r).copy_from_slice(&g.row(r)[ca..]);
                    }
                    accumulate(grads, *b, gb);
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let (n, k) = self.value(*logits).shape();
                let scale = g.get(0, 0) / targets.len() as f64;
                let mut gl = Tensor::zeros(n, k);
                for (t, &(row, label)) in targets.iter().enumerate() {
                    let out = gl.row_mut(row);
                    for (o, p) in out.iter_mut().zip(probs.row(t)) {
                        *o += scale * p;
                    }
                    out[label] -= scale;
                }
                accumulate(grads, *logits, gl);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn scatter(rows: usize, src: &Tensor, idx: &[usize]) -> Tensor {
    let mut out = Tensor::zeros(rows, src.cols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(i).copy_from_slice(src.row(r));
    }
    out
}

/// Checks that `idx` is strictly increasing and every entry is `< n`.
pub(crate) fn check_indices(op: &'static str, idx: &[usize], n: usize) -> Result<()> {
    if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
        return Err(Error::Index {
            op,
            reason: format!("index {bad} out of range for {n} rows"),
        });
    }
    if let Some(w) = idx.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::Index {
            op,
            reason: format!("indices not strictly increasing at {} -> {}", w[0], w[1]),
        });
    }
    Ok(())
}

/// Logistic function evaluated without overflow for large `|x|`.
pub fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
