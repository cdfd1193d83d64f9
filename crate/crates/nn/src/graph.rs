//! Tape-based reverse-mode automatic differentiation over row-major matrices.
//!
//! Every value is a 2-D `f64` array; scalars are `1 x 1`. Nodes are appended
//! in evaluation order, so a reverse sweep over the tape is a valid
//! topological order for the backward pass.

use std::collections::HashMap;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};

use crate::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Sigmoid(Var),
    LogSigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Square(Var),
    Sqrt(Var),
    Sum(Var),
    RowSum(Var),
    Transpose(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Gather(Var, Vec<usize>),
    Softmax(Var),
    LogSumExp(Var),
    Nll(Var, Vec<Option<usize>>),
    BceLogits(Var, Array2<f64>),
    GradReverse(Var, f64),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

/// A computation tape. Build it forward with the op methods, then call
/// [`Graph::backward`] on a scalar node.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

fn softmax_rows(a: ArrayView2<f64>) -> Array2<f64> {
    let mut out = a.to_owned();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - m).exp());
        let z = row.sum();
        row /= z;
    }
    out
}

fn logsumexp_rows(a: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), 1));
    for (i, row) in a.rows().into_iter().enumerate() {
        let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        out[[i, 0]] = m + row.mapv(|x| (x - m).exp()).sum().ln();
    }
    out
}

pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
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

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
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

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let a = self.value(v);
        assert_eq!(a.dim(), (1, 1), "node is not a scalar");
        a[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn scalar_constant(&mut self, x: f64) -> Var {
        self.constant(Array2::from_elem((1, 1), x))
    }

    /// Leaf for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.value(id).clone(), Op::Param);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "sub shape mismatch");
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1, "add_row expects a single row");
        assert_eq!(self.shape(a).1, self.shape(row).1, "add_row width mismatch");
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    /// Multiplies row `i` of `a` by `col[i, 0]`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        assert_eq!(
            self.shape(col),
            (self.shape(a).0, 1),
            "mul_col shape mismatch"
        );
        let v = self.value(a) * self.value(col);
        self.push(v, Op::MulCol(a, col))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(v, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) + k;
        self.push(v, Op::AddScalar(a))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    /// Elementwise `ln(sigmoid(a))`, stable for large `|a|`.
    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(log_sigmoid);
        self.push(v, Op::LogSigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::sqrt);
        self.push(v, Op::Sqrt(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    pub fn row_sum(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(v, Op::RowSum(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("concat_cols row mismatch");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = concatenate(Axis(0), &views).expect("concat_rows width mismatch");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a, start))
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![start..end, ..]).to_owned();
        self.push(v, Op::SliceRows(a, start))
    }

    /// Row `idx[i]` of `a` becomes row `i` of the output (embedding lookup).
    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Var {
        let src = self.value(a);
        let mut v = Array2::zeros((idx.len(), src.ncols()));
        for (i, &r) in idx.iter().enumerate() {
            v.row_mut(i).assign(&src.row(r));
        }
        self.push(v, Op::Gather(a, idx.to_vec()))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a).view());
        self.push(v, Op::Softmax(a))
    }

    /// Row-wise log-sum-exp, `n x 1`.
    pub fn logsumexp(&mut self, a: Var) -> Var {
        let v = logsumexp_rows(self.value(a).view());
        self.push(v, Op::LogSumExp(a))
    }

    /// Summed negative log-softmax of the target column over rows whose
    /// target is `Some`; a `1 x 1` node.
    pub fn nll(&mut self, logits: Var, targets: &[Option<usize>]) -> Var {
        let a = self.value(logits);
        assert_eq!(a.nrows(), targets.len(), "nll target count mismatch");
        let lse = logsumexp_rows(a.view());
        let total: f64 = targets
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.map(|t| lse[[i, 0]] - a[[i, t]]))
            .sum();
        self.push(
            Array2::from_elem((1, 1), total),
            Op::Nll(logits, targets.to_vec()),
        )
    }

    /// Elementwise logistic loss `softplus(x) - y x` against fixed targets.
    pub fn bce_logits(&mut self, logits: Var, targets: Array2<f64>) -> Var {
        assert_eq!(
            self.shape(logits),
            targets.dim(),
            "bce target shape mismatch"
        );
        let mut v = self.value(logits).clone();
        Zip::from(&mut v)
            .and(&targets)
            .for_each(|x, &y| *x = softplus(*x) - y * *x);
        self.push(v, Op::BceLogits(logits, targets))
    }

    /// Identity forward; the backward pass multiplies the gradient by `-k`.
    pub fn grad_reverse(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a).clone();
        self.push(v, Op::GradReverse(a, k))
    }

    /// `a W + b` for stored parameters.
    pub fn affine(&mut self, store: &ParamStore, a: Var, w: ParamId, b: ParamId) -> Var {
        let wv = self.param(store, w);
        let bv = self.param(store, b);
        let h = self.matmul(a, wv);
        self.add_row(h, bv)
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar loss");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Array2::ones((1, 1)));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[i] = Some(g);
        }
        let mut params = HashMap::new();
        for (&id, &v) in &self.params {
            if let Some(g) = grads.get(v.0).and_then(|g| g.as_ref()) {
                params.insert(id, g.clone());
            }
        }
        Gradients {
            nodes: grads,
            params,
        }
    }

    fn propagate(
        &self,
        op: &Op,
        out: &Array2<f64>,
        g: &Array2<f64>,
        grads: &mut [Option<Array2<f64>>],
    ) {
        let val = |v: Var| &self.nodes[v.0].value;
        match op {
            Op::Constant | Op::Param => {}
            Op::MatMul(a, b) => {
                accumulate(grads, *a, g.dot(&val(*b).t()));
                accumulate(grads, *b, val(*a).t().dot(g));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, -g);
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g * val(*b));
                accumulate(grads, *b, g * val(*a));
            }
            Op::AddRow(a, r) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::MulCol(a, c) => {
                accumulate(grads, *a, g * val(*c));
                let gc = (g * val(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                accumulate(grads, *c, gc);
            }
            Op::Scale(a, k) => accumulate(grads, *a, g * *k),
            Op::AddScalar(a) => accumulate(grads, *a, g.clone()),
            Op::Sigmoid(a) => accumulate(grads, *a, g * &out.mapv(|s| s * (1.0 - s))),
            Op::LogSigmoid(a) => accumulate(grads, *a, g * &val(*a).mapv(|x| 1.0 - sigmoid(x))),
            Op::Tanh(a) => accumulate(grads, *a, g * &out.mapv(|t| 1.0 - t * t)),
            Op::Relu(a) => {
                let mask = val(*a).mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                accumulate(grads, *a, g * &mask)
            }
            Op::Exp(a) => accumulate(grads, *a, g * out),
            Op::Square(a) => accumulate(grads, *a, g * &(val(*a) * 2.0)),
            Op::Sqrt(a) => accumulate(grads, *a, g * &out.mapv(|r| 0.5 / r)),
            Op::Sum(a) => accumulate(grads, *a, Array2::from_elem(val(*a).dim(), g[[0, 0]])),
            Op::RowSum(a) => {
                let ga = Array2::from_shape_fn(val(*a).dim(), |(i, _)| g[[i, 0]]);
                accumulate(grads, *a, ga)
            }
            Op::Transpose(a) => accumulate(grads, *a, g.t().to_owned()),
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = val(p).ncols();
                    accumulate(grads, p, g.slice(s![.., start..start + w]).to_owned());
                    start += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let h = val(p).nrows();
                    accumulate(grads, p, g.slice(s![start..start + h, ..]).to_owned());
                    start += h;
                }
            }
            Op::SliceCols(a, start) => {
                let mut ga = Array2::zeros(val(*a).dim());
                ga.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                accumulate(grads, *a, ga)
            }
            Op::SliceRows(a, start) => {
                let mut ga = Array2::zeros(val(*a).dim());
                ga.slice_mut(s![*start..*start + g.nrows(), ..]).assign(g);
                accumulate(grads, *a, ga)
            }
            Op::Gather(a, idx) => {
                let mut ga = Array2::zeros(val(*a).dim());
                for (i, &r) in idx.iter().enumerate() {
                    let mut row = ga.row_mut(r);
                    row += &g.row(i);
                }
                accumulate(grads, *a, ga)
            }
            Op::Softmax(a) => {
                let dot = (g * out).sum_axis(Axis(1)).insert_axis(Axis(1));
                accumulate(grads, *a, out * &(g - &dot))
            }
            Op::LogSumExp(a) => {
                let p = softmax_rows(val(*a).view());
                accumulate(grads, *a, p * g)
            }
            Op::Nll(a, targets) => {
                let mut p = softmax_rows(val(*a).view());
                for (i, t) in targets.iter().enumerate() {
                    match t {
                        Some(t) => p[[i, *t]] -= 1.0,
                        None => p.row_mut(i).fill(0.0),
                    }
                }
                accumulate(grads, *a, p * g[[0, 0]])
            }
            Op::BceLogits(a, y) => {
                let mut ga = val(*a).mapv(sigmoid);
                ga -= y;
                accumulate(grads, *a, ga * g)
            }
            Op::GradReverse(a, k) => accumulate(grads, *a, g * -*k),
        }
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot => *slot = Some(g),
    }
}

/// Result of a backward sweep.
#[derive(Debug)]
pub struct Gradients {
    nodes: Vec<Option<Array2<f64>>>,
    params: HashMap<ParamId, Array2<f64>>,
}

impl Gradients {
    /// Gradient with respect to any node, `None` if the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Option<&Array2<f64>> {
        self.nodes.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn param(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.params.get(&id)
    }

    /// Gradients for every parameter of `store`, zero where unused.
    pub fn for_store(&self, store: &ParamStore) -> Vec<Array2<f64>> {
        store
            .ids()
            .map(|id| {
                self.params
                    .get(&id)
                    .cloned()
                    .unwrap_or_else(|| Array2::zeros(store.value(id).dim()))
            })
            .collect()
    }
}
