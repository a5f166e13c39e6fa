//! Reverse-mode differentiation over batched matrix operations.
//!
//! A [`Tape`] records every operation applied to its [`Var`] handles in
//! evaluation order. [`Tape::backward`] replays the record in reverse and
//! returns the adjoint of a scalar loss with respect to each registered
//! parameter slot. Leaves created with [`Tape::constant`] never receive a
//! gradient.

use crate::error::{Error, Result};
use crate::nn::tensor::{axpy, matmul_nt, matmul_tn_acc, Matrix};
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Constant,
    Param(usize),
    /// `x · wᵀ`
    Linear(Var, Var),
    /// `x + b` with `b` a `1 × m` row broadcast over rows of `x`.
    AddRow(Var, Var),
    /// `x ⊙ r` with `r` a `1 × m` row broadcast over rows of `x`.
    MulRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    Tanh(Var),
    Exp(Var),
    Square(Var),
    LogSigmoid(Var),
    /// Row sums: `n × m → n × 1`.
    SumCols(Var),
    /// Total: `n × m → 1 × 1`.
    SumAll(Var),
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::Linear(..) => "linear",
            Op::AddRow(..) => "add_row",
            Op::MulRow(..) => "mul_row",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Tanh(..) => "tanh",
            Op::Exp(..) => "exp",
            Op::Square(..) => "square",
            Op::LogSigmoid(..) => "log_sigmoid",
            Op::SumCols(..) => "sum_cols",
            Op::SumAll(..) => "sum_all",
        }
    }
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
}

/// Gradient for every parameter slot registered on a tape, in slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub slots: Vec<Matrix<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn is_zero(&self) -> bool {
        self.slots
            .iter()
            .all(|m| m.as_slice().iter().all(|v| *v == T::zero()))
    }

    pub fn flat(&self) -> Vec<T> {
        self.slots
            .iter()
            .flat_map(|m| m.as_slice().iter().copied())
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    param_shapes: Vec<(usize, usize)>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            param_shapes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_params(&self) -> usize {
        self.param_shapes.len()
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Constant)
    }

    /// Registers a trainable leaf in the next parameter slot.
    pub fn param(&mut self, value: Matrix<T>) -> Var {
        let slot = self.param_shapes.len();
        self.param_shapes.push(value.shape());
        self.push(value, Op::Param(slot))
    }

    pub fn linear(&mut self, x: Var, w: Var) -> Var {
        let value = matmul_nt(self.value(x), self.value(w));
        self.push(value, Op::Linear(x, w))
    }

    pub fn add_row(&mut self, x: Var, b: Var) -> Var {
        let xv = self.value(x);
        let bv = self.value(b);
        assert_eq!(bv.shape(), (1, xv.cols()), "add_row broadcast shape");
        let mut value = xv.clone();
        for r in 0..value.rows() {
            for (y, &bi) in value.row_mut(r).iter_mut().zip(bv.as_slice()) {
                *y += bi;
            }
        }
        self.push(value, Op::AddRow(x, b))
    }

    pub fn mul_row(&mut self, x: Var, s: Var) -> Var {
        let xv = self.value(x);
        let sv = self.value(s);
        assert_eq!(sv.shape(), (1, xv.cols()), "mul_row broadcast shape");
        let mut value = xv.clone();
        for r in 0..value.rows() {
            for (y, &si) in value.row_mut(r).iter_mut().zip(sv.as_slice()) {
                *y *= si;
            }
        }
        self.push(value, Op::MulRow(x, s))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "add shape");
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "sub shape");
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "mul shape");
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let value = self.value(x).map(|v| v * c);
        self.push(value, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: T) -> Var {
        let value = self.value(x).map(|v| v + c);
        self.push(value, Op::AddScalar(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.tanh());
        self.push(value, Op::Tanh(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.exp());
        self.push(value, Op::Exp(x))
    }

    pub fn square(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v * v);
        self.push(value, Op::Square(x))
    }

    pub fn log_sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(Scalar::log_sigmoid);
        self.push(value, Op::LogSigmoid(x))
    }

    pub fn sum_cols(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let sums: Vec<T> = (0..xv.rows()).map(|r| xv.row(r).iter().copied().sum()).collect();
        let value = Matrix::from_vec(xv.rows(), 1, sums).expect("row sums");
        self.push(value, Op::SumCols(x))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let value = Matrix::scalar(self.value(x).sum());
        self.push(value, Op::SumAll(x))
    }

    /// Index and op name of the first recorded node holding a non-finite entry.
    pub fn first_non_finite(&self) -> Option<(usize, &'static str)> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, n)| !n.value.is_finite())
            .map(|(i, n)| (i, n.op.name()))
    }

    /// Adjoint of the scalar `loss` with respect to every parameter slot.
    ///
    /// Slots not reachable from `loss` come back as zero matrices.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::dims("backward loss (must be 1x1)", 1, lv.len()));
        }
        if !lv.item().is_finite() {
            let (node, op) = self
                .first_non_finite()
                .unwrap_or((loss.0, self.nodes[loss.0].op.name()));
            return Err(Error::NonFiniteNode { node, op });
        }

        let mut slots: Vec<Matrix<T>> = self
            .param_shapes
            .iter()
            .map(|&(r, c)| Matrix::zeros(r, c))
            .collect();
        let mut adj: Vec<Option<Matrix<T>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Matrix::scalar(T::one()));

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match node.op {
                Op::Constant => {}
                Op::Param(slot) => slots[slot].add_assign(&g),
                Op::Linear(x, w) => {
                    let xv = self.value(x);
                    let wv = self.value(w);
                    if self.needs_grad(x) {
                        let mut dx = Matrix::zeros(xv.rows(), xv.cols());
                        for r in 0..g.rows() {
                            let dxr = dx.row_mut(r);
                            for (o, &go) in g.row(r).iter().enumerate() {
                                if go != T::zero() {
                                    axpy(dxr, go, wv.row(o));
                                }
                            }
                        }
                        accumulate(&mut adj, x, dx);
                    }
                    if self.needs_grad(w) {
                        let mut dw = Matrix::zeros(wv.rows(), wv.cols());
                        matmul_tn_acc(&g, xv, &mut dw);
                        accumulate(&mut adj, w, dw);
                    }
                }
                Op::AddRow(x, b) => {
                    if self.needs_grad(b) {
                        let mut db = Matrix::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            axpy(db.as_mut_slice(), T::one(), g.row(r));
                        }
                        accumulate(&mut adj, b, db);
                    }
                    accumulate(&mut adj, x, g);
                }
                Op::MulRow(x, s) => {
                    let xv = self.value(x);
                    let sv = self.value(s);
                    if self.needs_grad(s) {
                        let mut ds = Matrix::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for ((d, &gi), &xi) in
                                ds.as_mut_slice().iter_mut().zip(g.row(r)).zip(xv.row(r))
                            {
                                *d += gi * xi;
                            }
                        }
                        accumulate(&mut adj, s, ds);
                    }
                    if self.needs_grad(x) {
                        let mut dx = g;
                        for r in 0..dx.rows() {
                            for (d, &si) in dx.row_mut(r).iter_mut().zip(sv.as_slice()) {
                                *d *= si;
                            }
                        }
                        accumulate(&mut adj, x, dx);
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, a, g.clone());
                    accumulate(&mut adj, b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, b, g.map(|v| -v));
                    accumulate(&mut adj, a, g);
                }
                Op::Mul(a, b) => {
                    let av = self.value(a);
                    let bv = self.value(b);
                    accumulate(&mut adj, a, g.zip_map(bv, |x, y| x * y));
                    accumulate(&mut adj, b, g.zip_map(av, |x, y| x * y));
                }
                Op::Scale(x, c) => accumulate(&mut adj, x, g.map(|v| v * c)),
                Op::AddScalar(x) => accumulate(&mut adj, x, g),
                Op::Tanh(x) => {
                    let d = g.zip_map(&node.value, |gi, y| gi * (T::one() - y * y));
                    accumulate(&mut adj, x, d);
                }
                Op::Exp(x) => {
                    let d = g.zip_map(&node.value, |gi, y| gi * y);
                    accumulate(&mut adj, x, d);
                }
                Op::Square(x) => {
                    let two = T::lit(2.0);
                    let d = g.zip_map(self.value(x), |gi, xi| two * gi * xi);
                    accumulate(&mut adj, x, d);
                }
                Op::LogSigmoid(x) => {
                    let d = g.zip_map(self.value(x), |gi, xi| gi * (-xi).sigmoid());
                    accumulate(&mut adj, x, d);
                }
                Op::SumCols(x) => {
                    let xv = self.value(x);
                    let mut d = Matrix::zeros(xv.rows(), xv.cols());
                    for r in 0..xv.rows() {
                        let gr = g.get(r, 0);
                        d.row_mut(r).iter_mut().for_each(|v| *v = gr);
                    }
                    accumulate(&mut adj, x, d);
                }
                Op::SumAll(x) => {
                    let xv = self.value(x);
                    accumulate(&mut adj, x, Matrix::filled(xv.rows(), xv.cols(), g.item()));
                }
            }
        }
        Ok(Gradients { slots })
    }

    fn needs_grad(&self, v: Var) -> bool {
        !matches!(self.nodes[v.0].op, Op::Constant)
    }
}

fn accumulate<T: Scalar>(adj: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) {
    match &mut adj[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
