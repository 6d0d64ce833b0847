//! Matrix-valued reverse-mode differentiation.
//!
//! A [`Tape`] owns every intermediate value. Operations append a node and
//! return a [`Var`] handle; nodes are only ever appended, so the node order is
//! a topological order and the backward sweep walks it in reverse.

use std::sync::Arc;

use rand::Rng;

use super::sparse::SparseMatrix;
use super::tensor::{dot, Tensor};
use super::NumericError;
use crate::par::Exec;

/// Clamp applied to probabilities inside [`Tape::cross_entropy`].
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMatMul(Arc<SparseMatrix>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRowBias(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    Log(Var),
    SoftmaxRows(Var),
    Sum(Var),
    Mean(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Transpose(Var),
    Reshape(Var),
    GatherRows(Var, Vec<usize>),
    Dropout(Var, Vec<f64>),
    CrossEntropy(Var, Tensor),
    MeanSoftplusGram { a: Var, b: Var, sign: f64 },
    MeanSoftplusGramBoth(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    exec: Exec,
}

/// Gradients produced by a backward sweep, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of `shape` when `v` was unreachable from the loss.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(shape.0, shape.1))
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

/// `log(1 + exp(x))` in overflow-safe form.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<(), NumericError> {
    if a.shape() != b.shape() {
        return Err(NumericError::Shape {
            op,
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    Ok(())
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::new(a.rows(), a.cols(), data).expect("zip_map preserves shape")
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_exec(exec: Exec) -> Self {
        Self {
            nodes: Vec::new(),
            exec,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Differentiable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `s · x` for a constant sparse operator `s`.
    pub fn sparse_matmul(&mut self, s: Arc<SparseMatrix>, x: Var) -> Result<Var, NumericError> {
        let value = s.mul_dense(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::SpMatMul(s, x), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        same_shape("add", self.value(a), self.value(b))?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        same_shape("sub", self.value(a), self.value(b))?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        same_shape("mul", self.value(a), self.value(b))?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    /// Adds the `1×c` row `bias` to every row of `a`.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var, NumericError> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.rows() != 1 || tb.cols() != ta.cols() {
            return Err(NumericError::Shape {
                op: "add_row_bias",
                lhs: ta.shape(),
                rhs: tb.shape(),
            });
        }
        let mut value = ta.clone();
        for r in 0..value.rows() {
            for (x, b) in value.row_mut(r).iter_mut().zip(tb.data()) {
                *x += b;
            }
        }
        let rg = self.rg(a) || self.rg(bias);
        Ok(self.push(value, Op::AddRowBias(a, bias), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|x| x * s);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, s), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let rg = self.rg(a);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let value = self.value(a).map(softplus);
        let rg = self.rg(a);
        self.push(value, Op::Softplus(a), rg)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::ln);
        let rg = self.rg(a);
        self.push(value, Op::Log(a), rg)
    }

    /// Row-wise softmax with the row maximum subtracted first.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for r in 0..value.rows() {
            softmax_in_place(value.row_mut(r));
        }
        let rg = self.rg(a);
        self.push(value, Op::SoftmaxRows(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, NumericError> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(NumericError::Empty { op: "mean" });
        }
        let value = Tensor::scalar(t.sum() / t.len() as f64);
        let rg = self.rg(a);
        Ok(self.push(value, Op::Mean(a), rg))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumericError> {
        let first = *parts
            .first()
            .ok_or(NumericError::Empty { op: "concat_rows" })?;
        let cols = self.value(first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(NumericError::Shape {
                    op: "concat_rows",
                    lhs: self.value(first).shape(),
                    rhs: t.shape(),
                });
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        let value = Tensor::new(rows, cols, data)?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec()), rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericError> {
        let first = *parts
            .first()
            .ok_or(NumericError::Empty { op: "concat_cols" })?;
        let rows = self.value(first).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(NumericError::Shape {
                    op: "concat_cols",
                    lhs: self.value(first).shape(),
                    rhs: t.shape(),
                });
            }
            cols += t.cols();
        }
        let mut value = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.nodes[p.0].value.row(r);
                value.row_mut(r)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let rg = self.rg(a);
        self.push(value, Op::Transpose(a), rg)
    }

    /// Reinterprets the row-major data under a new shape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, NumericError> {
        let t = self.value(a);
        if t.len() != rows * cols {
            return Err(NumericError::Shape {
                op: "reshape",
                lhs: t.shape(),
                rhs: (rows, cols),
            });
        }
        let value = Tensor::new(rows, cols, t.data().to_vec())?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Reshape(a), rg))
    }

    /// Selects rows by index; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var, NumericError> {
        let t = self.value(a);
        let mut value = Tensor::zeros(idx.len(), t.cols());
        for (dst, &i) in idx.iter().enumerate() {
            if i >= t.rows() {
                return Err(NumericError::Index {
                    op: "gather_rows",
                    index: i,
                    bound: t.rows(),
                });
            }
            value.row_mut(dst).copy_from_slice(t.row(i));
        }
        let rg = self.rg(a);
        Ok(self.push(value, Op::GatherRows(a, idx.to_vec()), rg))
    }

    /// Inverted dropout. Identity when `training` is false or `rate` is zero.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var, NumericError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NumericError::InvalidArgument {
                op: "dropout",
                reason: format!("rate {rate} outside [0, 1)"),
            });
        }
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 - rate;
        let mask: Vec<f64> = (0..self.value(a).len())
            .map(|_| {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let t = self.value(a);
        let data = t.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let value = Tensor::new(t.rows(), t.cols(), data)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Dropout(a, mask), rg))
    }

    /// Mean over rows of `-Σ_k y_k log(max(p_k, 1e-12))`.
    pub fn cross_entropy(&mut self, probs: Var, one_hot: &Tensor) -> Result<Var, NumericError> {
        let p = self.value(probs);
        same_shape("cross_entropy", p, one_hot)?;
        if p.rows() == 0 {
            return Err(NumericError::Empty {
                op: "cross_entropy",
            });
        }
        let total: f64 = p
            .data()
            .iter()
            .zip(one_hot.data())
            .filter(|(_, &y)| y != 0.0)
            .map(|(&pk, &y)| -y * pk.max(LOG_CLAMP).ln())
            .sum();
        let value = Tensor::scalar(total / p.rows() as f64);
        let rg = self.rg(probs);
        Ok(self.push(value, Op::CrossEntropy(probs, one_hot.clone()), rg))
    }

    /// `mean_{i,j} softplus(sign · (a bᵀ)_{ij})` without materializing `a bᵀ`.
    pub fn mean_softplus_gram(&mut self, a: Var, b: Var, sign: f64) -> Result<Var, NumericError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.cols() {
            return Err(NumericError::Shape {
                op: "mean_softplus_gram",
                lhs: ta.shape(),
                rhs: tb.shape(),
            });
        }
        if ta.rows() == 0 || tb.rows() == 0 {
            return Err(NumericError::Empty {
                op: "mean_softplus_gram",
            });
        }
        let row_sums = self.exec.map_range(ta.rows(), |i| {
            let ai = ta.row(i);
            (0..tb.rows())
                .map(|j| softplus(sign * dot(ai, tb.row(j))))
                .sum::<f64>()
        });
        let total: f64 = row_sums.iter().sum();
        let value = Tensor::scalar(total / (ta.rows() * tb.rows()) as f64);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MeanSoftplusGram { a, b, sign }, rg))
    }

    /// `mean_{i,j} [softplus(x_ij) + softplus(−x_ij)]` with `x = a bᵀ`, one
    /// exponential per pair.
    pub fn mean_softplus_gram_both(&mut self, a: Var, b: Var) -> Result<Var, NumericError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.cols() {
            return Err(NumericError::Shape {
                op: "mean_softplus_gram_both",
                lhs: ta.shape(),
                rhs: tb.shape(),
            });
        }
        if ta.rows() == 0 || tb.rows() == 0 {
            return Err(NumericError::Empty {
                op: "mean_softplus_gram_both",
            });
        }
        let row_sums = self.exec.map_range(ta.rows(), |i| {
            let ai = ta.row(i);
            (0..tb.rows())
                .map(|j| {
                    let x = dot(ai, tb.row(j)).abs();
                    x + 2.0 * (-x).exp().ln_1p()
                })
                .sum::<f64>()
        });
        let total: f64 = row_sums.iter().sum();
        let value = Tensor::scalar(total / (ta.rows() * tb.rows()) as f64);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MeanSoftplusGramBoth(a, b), rg))
    }

    /// Backpropagates from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumericError> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(NumericError::NotScalar { shape });
        }
        self.backward_from(&[(loss, Tensor::scalar(1.0))])
    }

    /// Backpropagates externally supplied output gradients. Seeds for the
    /// same variable accumulate.
    pub fn backward_from(&self, seeds: &[(Var, Tensor)]) -> Result<Gradients, NumericError> {
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let mut start = 0;
        for (v, g) in seeds {
            same_shape("backward_seed", self.value(*v), g)?;
            accumulate(&mut grads, *v, g.clone())?;
            start = start.max(v.0 + 1);
        }
        for idx in (0..start).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Gradients of `mean_{i,j} f(a_i · b_j)` given `f′` (already scaled by
    /// the upstream gradient). Pair weights are computed once; both operand
    /// gradients are products with them.
    fn gram_backward(
        &self,
        a: Var,
        b: Var,
        grads: &mut [Option<Tensor>],
        fprime: impl Fn(f64) -> f64 + Sync,
    ) -> Result<(), NumericError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let scale = 1.0 / (ta.rows() * tb.rows()) as f64;
        let mut w = Tensor::zeros(ta.rows(), tb.rows());
        self.exec.for_each_rows(w.data_mut(), tb.rows(), |i, dst| {
            let ai = ta.row(i);
            for (d, j) in dst.iter_mut().zip(0..tb.rows()) {
                *d = scale * fprime(dot(ai, tb.row(j)));
            }
        });
        if self.rg(a) {
            accumulate(grads, a, w.matmul(tb)?)?;
        }
        if self.rg(b) {
            accumulate(grads, b, w.t_matmul(ta)?)?;
        }
        Ok(())
    }

    fn propagate(
        &self,
        node: &Node,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<(), NumericError> {
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    accumulate(grads, *a, g.matmul_t(self.value(*b))?)?;
                }
                if self.rg(*b) {
                    accumulate(grads, *b, self.value(*a).t_matmul(g)?)?;
                }
            }
            Op::SpMatMul(s, x) => accumulate(grads, *x, s.t_mul_dense(g)?)?,
            Op::Add(a, b) => {
                if self.rg(*a) {
                    accumulate(grads, *a, g.clone())?;
                }
                if self.rg(*b) {
                    accumulate(grads, *b, g.clone())?;
                }
            }
            Op::Sub(a, b) => {
                if self.rg(*a) {
                    accumulate(grads, *a, g.clone())?;
                }
                if self.rg(*b) {
                    accumulate(grads, *b, g.map(|x| -x))?;
                }
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    accumulate(grads, *a, zip_map(g, self.value(*b), |x, y| x * y))?;
                }
                if self.rg(*b) {
                    accumulate(grads, *b, zip_map(g, self.value(*a), |x, y| x * y))?;
                }
            }
            Op::AddRowBias(a, bias) => {
                if self.rg(*a) {
                    accumulate(grads, *a, g.clone())?;
                }
                if self.rg(*bias) {
                    let mut col = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (c, x) in col.data_mut().iter_mut().zip(g.row(r)) {
                            *c += x;
                        }
                    }
                    accumulate(grads, *bias, col)?;
                }
            }
            Op::Scale(a, s) => accumulate(grads, *a, g.map(|x| x * s))?,
            Op::Relu(a) => {
                let d = zip_map(g, self.value(*a), |gx, x| if x > 0.0 { gx } else { 0.0 });
                accumulate(grads, *a, d)?;
            }
            Op::Tanh(a) => accumulate(grads, *a, zip_map(g, y, |gx, t| gx * (1.0 - t * t)))?,
            Op::Sigmoid(a) => accumulate(grads, *a, zip_map(g, y, |gx, s| gx * s * (1.0 - s)))?,
            Op::Softplus(a) => accumulate(
                grads,
                *a,
                zip_map(g, self.value(*a), |gx, x| gx * sigmoid(x)),
            )?,
            Op::Log(a) => accumulate(grads, *a, zip_map(g, self.value(*a), |gx, x| gx / x))?,
            Op::SoftmaxRows(a) => {
                let mut d = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let inner = dot(yr, gr);
                    for ((dst, &yk), &gk) in d.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *dst = yk * (gk - inner);
                    }
                }
                accumulate(grads, *a, d)?;
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(*a);
                accumulate(grads, *a, Tensor::filled(r, c, g.data()[0]))?;
            }
            Op::Mean(a) => {
                let (r, c) = self.shape(*a);
                accumulate(
                    grads,
                    *a,
                    Tensor::filled(r, c, g.data()[0] / (r * c) as f64),
                )?;
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    if self.rg(p) {
                        let slice = g.data()[offset * c..(offset + r) * c].to_vec();
                        accumulate(grads, p, Tensor::new(r, c, slice)?)?;
                    }
                    offset += r;
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    if self.rg(p) {
                        let mut part = Tensor::zeros(r, c);
                        for row in 0..r {
                            part.row_mut(row)
                                .copy_from_slice(&g.row(row)[offset..offset + c]);
                        }
                        accumulate(grads, p, part)?;
                    }
                    offset += c;
                }
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose())?,
            Op::Reshape(a) => {
                let (r, c) = self.shape(*a);
                accumulate(grads, *a, Tensor::new(r, c, g.data().to_vec())?)?;
            }
            Op::GatherRows(a, idx) => {
                let (r, c) = self.shape(*a);
                let mut d = Tensor::zeros(r, c);
                for (src, &i) in idx.iter().enumerate() {
                    for (dst, x) in d.row_mut(i).iter_mut().zip(g.row(src)) {
                        *dst += x;
                    }
                }
                accumulate(grads, *a, d)?;
            }
            Op::Dropout(a, mask) => {
                let data = g.data().iter().zip(mask).map(|(x, m)| x * m).collect();
                accumulate(grads, *a, Tensor::new(g.rows(), g.cols(), data)?)?;
            }
            Op::CrossEntropy(p, one_hot) => {
                let tp = self.value(*p);
                let scale = g.data()[0] / tp.rows() as f64;
                let d = zip_map(tp, one_hot, |pk, yk| {
                    if yk == 0.0 || pk < LOG_CLAMP {
                        0.0
                    } else {
                        -scale * yk / pk
                    }
                });
                accumulate(grads, *p, d)?;
            }
            Op::MeanSoftplusGram { a, b, sign } => {
                let sign = *sign;
                let coef = sign * g.data()[0];
                self.gram_backward(*a, *b, grads, |x| coef * sigmoid(sign * x))?;
            }
            Op::MeanSoftplusGramBoth(a, b) => {
                // d/dx [sp(x) + sp(−x)] = σ(x) − σ(−x) = tanh(x / 2)
                let coef = g.data()[0];
                self.gram_backward(*a, *b, grads, |x| coef * (0.5 * x).tanh())?;
            }
        }
        Ok(())
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) -> Result<(), NumericError> {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}
