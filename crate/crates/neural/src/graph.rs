//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Graph`] records every op of one forward pass in creation order, which
//! is a topological order; [`Graph::backward`] walks it in reverse.

use crate::error::{shape, NnError, Result};
use crate::tensor::{Scalar, Tensor};

/// Guards the per-column standardization against zero variance.
pub const STD_EPS: f64 = 1e-9;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    MulRow(Var, Var),
    Relu(Var),
    Neg(Var),
    Scale(Var, T),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Mean(Var),
    Variance(Var, Vec<f64>),
    Sum(Var),
    Standardize(Var, Vec<T>),
    SoftmaxCe(Var, Vec<usize>, Tensor<T>),
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, name: &str) -> Result<Var> {
        value.check_finite(name)?;
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::Concat(xs) => xs.iter().any(|&x| self.rg(x)),
            Op::MatMul(a, b) | Op::AddBias(a, b) | Op::Add(a, b) | Op::Mul(a, b) | Op::MulRow(a, b) => {
                self.rg(*a) || self.rg(*b)
            }
            Op::Relu(x)
            | Op::Neg(x)
            | Op::Scale(x, _)
            | Op::Slice(x, _)
            | Op::Mean(x)
            | Op::Variance(x, _)
            | Op::Sum(x)
            | Op::Standardize(x, _)
            | Op::SoftmaxCe(x, _, _) => self.rg(*x),
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Tensor<T>) -> Result<Var> {
        let v = self.push(value, Op::Leaf, "param")?;
        self.nodes[v.0].requires_grad = true;
        Ok(v)
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var> {
        self.push(value, Op::Leaf, "constant")
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Gradient accumulated by the last [`Graph::backward`], if any reached `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads[v.0].as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads[v.0].take()
    }

    fn val(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.val(a).matmul(self.val(b))?;
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    /// Adds the `1 x cols` row `b` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.val(x), self.val(b));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return shape(format!("add_bias: {:?} + {:?}", xv.shape(), bv.shape()));
        }
        let mut out = xv.clone();
        let c = xv.cols();
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            *o += bv.data()[i % c];
        }
        self.push(out, Op::AddBias(x, b), "add_bias")
    }

    /// Multiplies every row of `x` elementwise by the `1 x cols` row `r`.
    pub fn mul_row(&mut self, x: Var, r: Var) -> Result<Var> {
        let (xv, rv) = (self.val(x), self.val(r));
        if rv.rows() != 1 || rv.cols() != xv.cols() {
            return shape(format!("mul_row: {:?} * {:?}", xv.shape(), rv.shape()));
        }
        let mut out = xv.clone();
        let c = xv.cols();
        for (i, o) in out.data_mut().iter_mut().enumerate() {
            *o *= rv.data()[i % c];
        }
        self.push(out, Op::MulRow(x, r), "mul_row")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.val(a).zip_map(self.val(b), |x, y| x + y)?;
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.val(a).zip_map(self.val(b), |x, y| x * y)?;
        self.push(out, Op::Mul(a, b), "mul")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.val(x).map(|v| v.max(T::zero()));
        self.push(out, Op::Relu(x), "relu")
    }

    pub fn negate(&mut self, x: Var) -> Result<Var> {
        let out = self.val(x).map(|v| -v);
        self.push(out, Op::Neg(x), "negate")
    }

    pub fn scale(&mut self, x: Var, c: T) -> Result<Var> {
        let out = self.val(x).map(|v| v * c);
        self.push(out, Op::Scale(x, c), "scale")
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return shape("concat_cols of nothing");
        };
        let rows = self.val(first).rows();
        if let Some(bad) = xs.iter().find(|&&x| self.val(x).rows() != rows) {
            return shape(format!("concat_cols: {} rows vs {}", self.val(*bad).rows(), rows));
        }
        let cols: usize = xs.iter().map(|&x| self.val(x).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &x in xs {
                data.extend_from_slice(self.val(x).row(r));
            }
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        self.push(out, Op::Concat(xs.to_vec()), "concat_cols")
    }

    /// Columns `start..end` of `x`.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let xv = self.val(x);
        if start >= end || end > xv.cols() {
            return shape(format!("slice_cols {start}..{end} of {} columns", xv.cols()));
        }
        let out = Tensor::from_fn(xv.rows(), end - start, |r, c| xv.get(r, start + c));
        self.push(out, Op::Slice(x, start), "slice_cols")
    }

    /// Column means, `1 x cols`.
    pub fn reduce_mean(&mut self, x: Var) -> Result<Var> {
        let (mean, _) = self.val(x).column_moments();
        let out = Tensor::from_vec(1, mean.len(), mean.iter().map(|&m| T::of(m)).collect())?;
        self.push(out, Op::Mean(x), "reduce_mean")
    }

    /// Column population variances, `1 x cols`.
    pub fn reduce_var(&mut self, x: Var) -> Result<Var> {
        let (mean, var) = self.val(x).column_moments();
        let out = Tensor::from_vec(1, var.len(), var.iter().map(|&v| T::of(v)).collect())?;
        self.push(out, Op::Variance(x, mean), "reduce_var")
    }

    /// Sum of all entries, `1 x 1`.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let out = Tensor::scalar(self.val(x).sum());
        self.push(out, Op::Sum(x), "sum")
    }

    /// `(x - mean) / sqrt(var + STD_EPS)` per column, using this batch's
    /// statistics.
    pub fn standardize(&mut self, x: Var) -> Result<Var> {
        let xv = self.val(x);
        let (mean, var) = xv.column_moments();
        let inv: Vec<f64> = var.iter().map(|v| 1.0 / (v + STD_EPS).sqrt()).collect();
        let c = xv.cols();
        let out = Tensor::from_fn(xv.rows(), c, |r, j| T::of((xv.get(r, j).as_f64() - mean[j]) * inv[j]));
        let inv = inv.into_iter().map(T::of).collect();
        self.push(out, Op::Standardize(x, inv), "standardize")
    }

    /// Mean over rows of `-log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.val(logits);
        if labels.len() != lv.rows() {
            return shape(format!("{} labels for {} rows", labels.len(), lv.rows()));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= lv.cols()) {
            return shape(format!("label {l} out of range for {} classes", lv.cols()));
        }
        let mut probs = Tensor::zeros(lv.rows(), lv.cols());
        let mut total = 0.0f64;
        for (r, &label) in labels.iter().enumerate() {
            let row = lv.row(r);
            let mx = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let z: f64 = row.iter().map(|&v| (v - mx).as_f64().exp()).sum();
            for (c, &v) in row.iter().enumerate() {
                probs.set(r, c, T::of((v - mx).as_f64().exp() / z));
            }
            total += z.ln() - (row[label] - mx).as_f64();
        }
        let out = Tensor::scalar(T::of(total / labels.len() as f64));
        self.push(out, Op::SoftmaxCe(logits, labels.to_vec(), probs), "softmax_cross_entropy")
    }

    /// Populates gradients of the scalar `loss` with respect to every node
    /// that depends on a parameter. Previous gradients are cleared.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.val(loss).shape() != (1, 1) {
            return shape(format!("backward needs a 1x1 loss, got {:?}", self.val(loss).shape()));
        }
        if !self.rg(loss) {
            return Err(NnError::Usage("backward on a value that depends on no parameter".into()));
        }
        self.grads.iter_mut().for_each(|g| *g = None);
        self.grads[loss.0] = Some(Tensor::scalar(T::one()));
        for i in (0..=loss.0).rev() {
            let Some(g) = self.grads[i].take() else { continue };
            self.propagate(i, &g)?;
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Tensor<T>) -> Result<()> {
        if !self.rg(v) {
            return Ok(());
        }
        match &mut self.grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => {
                *slot = Some(g);
                Ok(())
            }
        }
    }

    fn propagate(&mut self, i: usize, g: &Tensor<T>) -> Result<()> {
        let op = self.nodes[i].op.clone();
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(a) {
                    let ga = g.matmul_t(false, self.val(b), true)?;
                    self.accumulate(a, ga)?;
                }
                if self.rg(b) {
                    let gb = self.val(a).matmul_t(true, g, false)?;
                    self.accumulate(b, gb)?;
                }
            }
            Op::AddBias(x, b) => {
                if self.rg(b) {
                    let gb = column_sums(g);
                    self.accumulate(b, gb)?;
                }
                self.accumulate(x, g.clone())?;
            }
            Op::MulRow(x, r) => {
                let c = g.cols();
                if self.rg(x) {
                    let rv = self.val(r);
                    let mut gx = g.clone();
                    for (k, v) in gx.data_mut().iter_mut().enumerate() {
                        *v *= rv.data()[k % c];
                    }
                    self.accumulate(x, gx)?;
                }
                if self.rg(r) {
                    let gr = column_sums(&g.zip_map(self.val(x), |a, b| a * b)?);
                    self.accumulate(r, gr)?;
                }
            }
            Op::Add(a, b) => {
                self.accumulate(a, g.clone())?;
                self.accumulate(b, g.clone())?;
            }
            Op::Mul(a, b) => {
                if self.rg(a) {
                    let ga = g.zip_map(self.val(b), |x, y| x * y)?;
                    self.accumulate(a, ga)?;
                }
                if self.rg(b) {
                    let gb = g.zip_map(self.val(a), |x, y| x * y)?;
                    self.accumulate(b, gb)?;
                }
            }
            Op::Relu(x) => {
                let gx = g.zip_map(&self.nodes[i].value, |gv, out| if out > T::zero() { gv } else { T::zero() })?;
                self.accumulate(x, gx)?;
            }
            Op::Neg(x) => self.accumulate(x, g.map(|v| -v))?,
            Op::Scale(x, c) => self.accumulate(x, g.map(|v| v * c))?,
            Op::Concat(xs) => {
                let mut start = 0;
                for x in xs {
                    let w = self.val(x).cols();
                    let gx = Tensor::from_fn(g.rows(), w, |r, c| g.get(r, start + c));
                    start += w;
                    self.accumulate(x, gx)?;
                }
            }
            Op::Slice(x, start) => {
                let (rows, cols) = self.val(x).shape();
                let w = g.cols();
                let gx = Tensor::from_fn(rows, cols, |r, c| {
                    if c >= start && c < start + w {
                        g.get(r, c - start)
                    } else {
                        T::zero()
                    }
                });
                self.accumulate(x, gx)?;
            }
            Op::Mean(x) => {
                let (rows, cols) = self.val(x).shape();
                let n = T::of_usize(rows);
                let gx = Tensor::from_fn(rows, cols, |_, c| g.get(0, c) / n);
                self.accumulate(x, gx)?;
            }
            Op::Variance(x, mean) => {
                let xv = self.val(x);
                let n = xv.rows() as f64;
                let gx = Tensor::from_fn(xv.rows(), xv.cols(), |r, c| {
                    T::of(2.0 * (xv.get(r, c).as_f64() - mean[c]) / n * g.get(0, c).as_f64())
                });
                self.accumulate(x, gx)?;
            }
            Op::Sum(x) => {
                let (rows, cols) = self.val(x).shape();
                let gx = Tensor::filled(rows, cols, g.get(0, 0));
                self.accumulate(x, gx)?;
            }
            Op::Standardize(x, inv) => {
                let out = &self.nodes[i].value;
                let (rows, cols) = out.shape();
                let n = rows as f64;
                let mut mg = vec![0.0f64; cols];
                let mut mgo = vec![0.0f64; cols];
                for r in 0..rows {
                    for c in 0..cols {
                        let gv = g.get(r, c).as_f64();
                        mg[c] += gv;
                        mgo[c] += gv * out.get(r, c).as_f64();
                    }
                }
                let gx = Tensor::from_fn(rows, cols, |r, c| {
                    let v = g.get(r, c).as_f64() - mg[c] / n - out.get(r, c).as_f64() * mgo[c] / n;
                    T::of(v * inv[c].as_f64())
                });
                self.accumulate(x, gx)?;
            }
            Op::SoftmaxCe(logits, labels, probs) => {
                let n = T::of_usize(labels.len());
                let scale = g.get(0, 0) / n;
                let mut gx = probs;
                for (r, &l) in labels.iter().enumerate() {
                    let v = gx.get(r, l);
                    gx.set(r, l, v - T::one());
                }
                gx.data_mut().iter_mut().for_each(|v| *v *= scale);
                self.accumulate(logits, gx)?;
            }
        }
        Ok(())
    }
}

fn column_sums<T: Scalar>(g: &Tensor<T>) -> Tensor<T> {
    let mut acc = vec![0.0f64; g.cols()];
    for r in 0..g.rows() {
        for (a, v) in acc.iter_mut().zip(g.row(r)) {
            *a += v.as_f64();
        }
    }
    Tensor::from_vec(1, g.cols(), acc.into_iter().map(T::of).collect()).expect("width matches")
}
