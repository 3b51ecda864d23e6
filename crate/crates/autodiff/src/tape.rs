//! Dynamic reverse-mode tape.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s in creation order, which is
//! already a topological order, so the backward pass is a single reverse sweep.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{AutodiffError, Result};
use crate::tensor::{broadcast_zip, expand_to, matmul, reduce_to, Tensor};

/// Bounds applied to `log σ` before exponentiation in [`Var::gaussian_sample`].
pub const LOG_STD_MIN: f64 = -10.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Tanh(usize),
    Relu(usize),
    Exp(usize),
    Sqrt(usize),
    Square(usize),
    Abs(usize),
    Clip(usize, f64, f64),
    Sum(usize),
    SumCols(usize),
    SumRows(usize),
    ConcatCols(Vec<usize>),
    SliceCols(usize, usize),
    GatherRows(usize, Vec<usize>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Shared handle to a recording; cloning shares the same graph.
#[derive(Clone, Debug, Default)]
pub struct Tape(Rc<RefCell<Vec<Node>>>);

#[derive(Clone, Debug)]
pub struct Var {
    tape: Tape,
    idx: usize,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let mut nodes = self.0.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.clone(),
            idx: nodes.len() - 1,
        }
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// An input that receives no gradient.
    pub fn constant(&self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Gradients of the scalar `output` with respect to every recorded node.
    pub fn backward(&self, output: &Var) -> Result<Gradients> {
        let shape = output.shape();
        if shape != (1, 1) {
            return Err(AutodiffError::ShapeMismatch(format!(
                "backward needs a 1x1 output, got {}x{}",
                shape.0, shape.1
            )));
        }
        self.backward_with(output, Tensor::scalar(1.0))
    }

    /// Vector-Jacobian product with an explicit output cotangent `seed`.
    pub fn backward_with(&self, output: &Var, seed: Tensor) -> Result<Gradients> {
        self.check_owner(output)?;
        let nodes = self.0.borrow();
        if nodes[output.idx].value.shape() != seed.shape() {
            return Err(AutodiffError::ShapeMismatch("seed must match the output shape".into()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.idx + 1];
        grads[output.idx] = Some(seed);
        for idx in (0..=output.idx).rev() {
            let node = &nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            if node.requires_grad {
                propagate(&nodes, node, g, &mut grads);
            }
        }
        Ok(Gradients { grads })
    }

    fn check_owner(&self, var: &Var) -> Result<()> {
        if Rc::ptr_eq(&self.0, &var.tape.0) {
            Ok(())
        } else {
            Err(AutodiffError::InvalidArgument("variable belongs to a different tape".into()))
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], nodes: &[Node], idx: usize, g: Tensor) {
    if !nodes[idx].requires_grad {
        return;
    }
    match &mut grads[idx] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

/// Adds a same-shaped gradient by reference, copying only when the slot is empty.
fn accumulate_ref(grads: &mut [Option<Tensor>], nodes: &[Node], idx: usize, g: &Tensor) {
    if !nodes[idx].requires_grad {
        return;
    }
    match &mut grads[idx] {
        Some(existing) => existing.add_assign(g),
        slot => *slot = Some(g.clone()),
    }
}

/// Routes `g` to an operand, summing over its broadcast dimensions.
fn accumulate_reduced(grads: &mut [Option<Tensor>], nodes: &[Node], idx: usize, g: &Tensor) {
    let shape = nodes[idx].value.shape();
    if g.shape() == shape {
        accumulate_ref(grads, nodes, idx, g);
    } else if nodes[idx].requires_grad {
        accumulate(grads, nodes, idx, reduce_to(g, shape));
    }
}

/// As [`accumulate_reduced`], consuming `g` to avoid a copy.
fn accumulate_reduced_owned(grads: &mut [Option<Tensor>], nodes: &[Node], idx: usize, g: Tensor) {
    let shape = nodes[idx].value.shape();
    if g.shape() == shape {
        accumulate(grads, nodes, idx, g);
    } else if nodes[idx].requires_grad {
        accumulate(grads, nodes, idx, reduce_to(&g, shape));
    }
}

fn elementwise(g: &Tensor, x: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    broadcast_zip(g, x, f).expect("gradient has the operand's shape")
}

fn propagate(nodes: &[Node], node: &Node, g: Tensor, grads: &mut [Option<Tensor>]) {
    match node.op {
        Op::Add(a, b) => {
            if nodes[b].requires_grad {
                accumulate_reduced(grads, nodes, a, &g);
                accumulate_reduced_owned(grads, nodes, b, g);
            } else {
                accumulate_reduced_owned(grads, nodes, a, g);
            }
            return;
        }
        Op::AddScalar(a) => return accumulate(grads, nodes, a, g),
        _ => {}
    }
    let g = &g;
    let val = |i: usize| &nodes[i].value;
    let out = &node.value;
    match node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            if nodes[a].requires_grad {
                accumulate(grads, nodes, a, matmul(g, false, val(b), true).expect("shapes recorded"));
            }
            if nodes[b].requires_grad {
                accumulate(grads, nodes, b, matmul(val(a), true, g, false).expect("shapes recorded"));
            }
        }
        Op::Add(..) | Op::AddScalar(_) => unreachable!("handled above"),
        Op::Sub(a, b) => {
            accumulate_reduced(grads, nodes, a, g);
            if nodes[b].requires_grad {
                accumulate(grads, nodes, b, reduce_to(g, val(b).shape()).map(|x| -x));
            }
        }
        Op::Mul(a, b) => {
            if nodes[a].requires_grad {
                let full = broadcast_zip(g, val(b), |x, y| x * y).expect("shapes recorded");
                accumulate(grads, nodes, a, reduce_to(&full, val(a).shape()));
            }
            if nodes[b].requires_grad {
                let full = broadcast_zip(g, val(a), |x, y| x * y).expect("shapes recorded");
                accumulate(grads, nodes, b, reduce_to(&full, val(b).shape()));
            }
        }
        Op::Scale(a, k) => {
            if nodes[a].requires_grad {
                accumulate(grads, nodes, a, g.map(|x| x * k));
            }
        }
        Op::Tanh(a) => accumulate(grads, nodes, a, elementwise(g, out, |gi, y| gi * (1.0 - y * y))),
        Op::Relu(a) => accumulate(grads, nodes, a, elementwise(g, val(a), |gi, x| if x > 0.0 { gi } else { 0.0 })),
        Op::Exp(a) => accumulate(grads, nodes, a, elementwise(g, out, |gi, y| gi * y)),
        Op::Sqrt(a) => accumulate(
            grads,
            nodes,
            a,
            elementwise(g, out, |gi, y| if y > 0.0 { gi * 0.5 / y } else { 0.0 }),
        ),
        Op::Square(a) => accumulate(grads, nodes, a, elementwise(g, val(a), |gi, x| 2.0 * gi * x)),
        Op::Abs(a) => accumulate(
            grads,
            nodes,
            a,
            elementwise(g, val(a), |gi, x| if x > 0.0 { gi } else if x < 0.0 { -gi } else { 0.0 }),
        ),
        Op::Clip(a, lo, hi) => accumulate(
            grads,
            nodes,
            a,
            elementwise(g, val(a), |gi, x| if x >= lo && x <= hi { gi } else { 0.0 }),
        ),
        Op::Sum(a) | Op::SumCols(a) | Op::SumRows(a) => {
            accumulate(grads, nodes, a, expand_to(g, val(a).shape()));
        }
        Op::ConcatCols(ref parts) => {
            let mut offset = 0;
            for &p in parts {
                let width = val(p).cols;
                if nodes[p].requires_grad {
                    accumulate(grads, nodes, p, slice_cols(g, offset, offset + width));
                }
                offset += width;
            }
        }
        Op::SliceCols(a, start) => {
            let src = val(a);
            let mut full = Tensor::zeros(src.rows, src.cols);
            for r in 0..g.rows {
                full.data[r * src.cols + start..r * src.cols + start + g.cols].copy_from_slice(g.row_slice(r));
            }
            accumulate(grads, nodes, a, full);
        }
        Op::GatherRows(a, ref rows) => {
            let src = val(a);
            let mut full = Tensor::zeros(src.rows, src.cols);
            for (k, &r) in rows.iter().enumerate() {
                for (x, gi) in full.data[r * src.cols..(r + 1) * src.cols].iter_mut().zip(g.row_slice(k)) {
                    *x += gi;
                }
            }
            accumulate(grads, nodes, a, full);
        }
    }
}

fn slice_cols(t: &Tensor, start: usize, end: usize) -> Tensor {
    let width = end - start;
    let mut data = Vec::with_capacity(t.rows * width);
    for r in 0..t.rows {
        data.extend_from_slice(&t.row_slice(r)[start..end]);
    }
    Tensor {
        rows: t.rows,
        cols: width,
        data,
    }
}

/// Gradients from one backward pass. Only leaves keep their gradient; intermediate
/// results are released as the pass proceeds.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when `var` is not a leaf, is a constant, or does not influence the output.
    pub fn get(&self, var: &Var) -> Option<&Tensor> {
        self.grads.get(var.idx).and_then(Option::as_ref)
    }

    /// Gradient of `var`, zero-filled when it does not influence the output.
    pub fn wrt(&self, var: &Var) -> Tensor {
        match self.get(var) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = var.shape();
                Tensor::zeros(r, c)
            }
        }
    }
}

impl Var {
    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.0.borrow()[self.idx].value.shape()
    }

    pub fn value(&self) -> Tensor {
        self.tape.0.borrow()[self.idx].value.clone()
    }

    pub fn with_value<T>(&self, f: impl FnOnce(&Tensor) -> T) -> T {
        f(&self.tape.0.borrow()[self.idx].value)
    }

    pub fn item(&self) -> f64 {
        self.with_value(Tensor::item)
    }

    fn requires_grad(&self) -> bool {
        self.tape.0.borrow()[self.idx].requires_grad
    }

    fn unary(&self, op: Op, f: impl FnOnce(&Tensor) -> Tensor) -> Var {
        let value = self.with_value(f);
        self.tape.push(value, op, self.requires_grad())
    }

    fn binary(&self, other: &Var, op: Op, f: impl FnOnce(&Tensor, &Tensor) -> Result<Tensor>) -> Result<Var> {
        self.tape.check_owner(other)?;
        let value = {
            let nodes = self.tape.0.borrow();
            f(&nodes[self.idx].value, &nodes[other.idx].value)?
        };
        let requires_grad = self.requires_grad() || other.requires_grad();
        Ok(self.tape.push(value, op, requires_grad))
    }

    pub fn matmul(&self, other: &Var) -> Result<Var> {
        self.binary(other, Op::MatMul(self.idx, other.idx), |a, b| matmul(a, false, b, false))
    }

    /// Elementwise sum with broadcasting over unit dimensions.
    pub fn add(&self, other: &Var) -> Result<Var> {
        self.binary(other, Op::Add(self.idx, other.idx), |a, b| broadcast_zip(a, b, |x, y| x + y))
    }

    pub fn sub(&self, other: &Var) -> Result<Var> {
        self.binary(other, Op::Sub(self.idx, other.idx), |a, b| broadcast_zip(a, b, |x, y| x - y))
    }

    pub fn mul(&self, other: &Var) -> Result<Var> {
        self.binary(other, Op::Mul(self.idx, other.idx), |a, b| broadcast_zip(a, b, |x, y| x * y))
    }

    pub fn scale(&self, k: f64) -> Var {
        self.unary(Op::Scale(self.idx, k), |t| t.map(|x| x * k))
    }

    pub fn neg(&self) -> Var {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, k: f64) -> Var {
        self.unary(Op::AddScalar(self.idx), |t| t.map(|x| x + k))
    }

    pub fn tanh(&self) -> Var {
        self.unary(Op::Tanh(self.idx), |t| t.map(f64::tanh))
    }

    pub fn relu(&self) -> Var {
        self.unary(Op::Relu(self.idx), |t| t.map(|x| x.max(0.0)))
    }

    pub fn exp(&self) -> Var {
        self.unary(Op::Exp(self.idx), |t| t.map(f64::exp))
    }

    /// Square root; the gradient at 0 is taken as 0.
    pub fn sqrt(&self) -> Var {
        self.unary(Op::Sqrt(self.idx), |t| t.map(f64::sqrt))
    }

    pub fn square(&self) -> Var {
        self.unary(Op::Square(self.idx), |t| t.map(|x| x * x))
    }

    pub fn abs(&self) -> Var {
        self.unary(Op::Abs(self.idx), |t| t.map(f64::abs))
    }

    /// Clamps to `[lo, hi]`; values outside the interval get zero gradient.
    pub fn clip(&self, lo: f64, hi: f64) -> Var {
        self.unary(Op::Clip(self.idx, lo, hi), |t| t.map(|x| x.clamp(lo, hi)))
    }

    /// Sum of all entries as a 1x1 tensor.
    pub fn sum(&self) -> Var {
        self.unary(Op::Sum(self.idx), |t| Tensor::scalar(t.data.iter().sum()))
    }

    pub fn mean(&self) -> Var {
        let (r, c) = self.shape();
        self.sum().scale(1.0 / (r * c) as f64)
    }

    /// Per-row sums, shape `(rows, 1)`.
    pub fn sum_cols(&self) -> Var {
        self.unary(Op::SumCols(self.idx), |t| Tensor {
            rows: t.rows,
            cols: 1,
            data: (0..t.rows).map(|r| t.row_slice(r).iter().sum()).collect(),
        })
    }

    /// Per-column sums, shape `(1, cols)`.
    pub fn sum_rows(&self) -> Var {
        self.unary(Op::SumRows(self.idx), |t| reduce_to(t, (1, t.cols)))
    }

    /// Row-wise L1 norm, shape `(rows, 1)`.
    pub fn l1_norm(&self) -> Var {
        self.abs().sum_cols()
    }

    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Var> {
        let (_, cols) = self.shape();
        if start > end || end > cols {
            return Err(AutodiffError::ShapeMismatch(format!(
                "column slice {start}..{end} of a tensor with {cols} columns"
            )));
        }
        Ok(self.unary(Op::SliceCols(self.idx, start), |t| slice_cols(t, start, end)))
    }

    /// Rows `rows[0], rows[1], …` of this tensor; indices may repeat.
    pub fn gather_rows(&self, rows: &[usize]) -> Result<Var> {
        let (n, _) = self.shape();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(AutodiffError::ShapeMismatch(format!("row {bad} of a tensor with {n} rows")));
        }
        Ok(self.unary(Op::GatherRows(self.idx, rows.to_vec()), |t| {
            let mut data = Vec::with_capacity(rows.len() * t.cols);
            for &r in rows {
                data.extend_from_slice(t.row_slice(r));
            }
            Tensor {
                rows: rows.len(),
                cols: t.cols,
                data,
            }
        }))
    }

    /// Horizontal concatenation of tensors with equal row counts.
    pub fn concat_cols(parts: &[&Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| AutodiffError::InvalidArgument("nothing to concatenate".into()))?;
        let tape = first.tape.clone();
        for p in parts {
            tape.check_owner(p)?;
        }
        let value = {
            let nodes = tape.0.borrow();
            let rows = nodes[first.idx].value.rows;
            if parts.iter().any(|p| nodes[p.idx].value.rows != rows) {
                return Err(AutodiffError::ShapeMismatch("concatenated tensors differ in rows".into()));
            }
            let cols: usize = parts.iter().map(|p| nodes[p.idx].value.cols).sum();
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                for p in parts {
                    data.extend_from_slice(nodes[p.idx].value.row_slice(r));
                }
            }
            Tensor { rows, cols, data }
        };
        let requires_grad = parts.iter().any(|p| p.requires_grad());
        Ok(tape.push(value, Op::ConcatCols(parts.iter().map(|p| p.idx).collect()), requires_grad))
    }

    /// The same value with the graph cut: downstream gradients stop here.
    pub fn detach(&self) -> Var {
        self.tape.constant(self.value())
    }

    /// Reparameterised sample `μ + exp(clamp(log σ)) ⊙ ε` for pre-drawn noise `ε`.
    pub fn gaussian_sample(mean: &Var, log_std: &Var, noise: &Tensor) -> Result<Var> {
        let std = log_std.clip(LOG_STD_MIN, LOG_STD_MAX).exp();
        let eps = mean.tape.constant(noise.clone());
        mean.add(&std.mul(&eps)?)
    }
}
