//! Reverse-mode differentiation over a flat tape of matrix primitives.
//!
//! Every operation appends a node holding its output value. `backward` walks
//! the tape in reverse, accumulating adjoints only along paths that reach a
//! differentiable leaf; `StopGradient` nodes cut those paths.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::special::{normal_cdf, normal_pdf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Constant,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Clamp(Var, f64, f64),
    Concat(Var, Var),
    StopGradient(Var),
    Sum(Var),
    MeanSquare(Var, Var),
    NormalCdf(Var, f64),
    RowSoftmax(Var),
    BceWithLogits(Var, Matrix),
    SoftmaxCrossEntropy(Var, Vec<usize>),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Matrix,
    requires_grad: bool,
}

#[derive(Default, Clone, Debug)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every node reached by `backward`.
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.adjoints[v.0].as_ref()
    }

    /// Gradient for `v`, or zeros when no path from the loss reaches it.
    pub fn wrt(&self, v: Var) -> Matrix {
        match &self.adjoints[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A differentiable input (a parameter).
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// A non-differentiable input (data, noise, frozen weights).
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(Op::Constant, value, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let op = Op::MatMul(a, b);
        let value = self.eval(&op)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(op, value, rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.unary(Op::Transpose(a), a)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Op::Add(a, b), a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Op::Sub(a, b), a, b)
    }

    /// Adds the 1×c row `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.binary(Op::AddRow(a, row), a, row)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Op::Mul(a, b), a, b)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.unary(Op::Scale(a, s), a)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(Op::Relu(a), a)
    }

    /// `min(hi, max(lo, a))`. The derivative is 1 strictly inside `(lo, hi)`
    /// and 0 elsewhere, including at the boundary points.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        self.unary(Op::Clamp(a, lo, hi), a)
    }

    /// Horizontal concatenation `[a | b]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Op::Concat(a, b), a, b)
    }

    pub fn stop_gradient(&mut self, a: Var) -> Result<Var> {
        let op = Op::StopGradient(a);
        let value = self.eval(&op)?;
        Ok(self.push(op, value, false))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.unary(Op::Sum(a), a)
    }

    /// `mean((a - b)^2)` over all entries, as a 1×1 node.
    pub fn mean_square(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Op::MeanSquare(a, b), a, b)
    }

    /// Elementwise `Φ(a / sigma)`.
    pub fn normal_cdf(&mut self, a: Var, sigma: f64) -> Result<Var> {
        if sigma.is_nan() || sigma <= 0.0 {
            return Err(Error::Contract(format!(
                "normal_cdf scale must be positive, got {sigma}"
            )));
        }
        self.unary(Op::NormalCdf(a, sigma), a)
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        self.unary(Op::RowSoftmax(a), a)
    }

    /// Mean binary cross-entropy of n×1 logits against 0/1 targets.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Matrix) -> Result<Var> {
        self.unary(Op::BceWithLogits(logits, targets), logits)
    }

    /// Mean softmax cross-entropy of n×C logits against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: Vec<usize>) -> Result<Var> {
        self.unary(Op::SoftmaxCrossEntropy(logits, labels), logits)
    }

    fn unary(&mut self, op: Op, a: Var) -> Result<Var> {
        let value = self.eval(&op)?;
        let rg = self.rg(a);
        Ok(self.push(op, value, rg))
    }

    fn binary(&mut self, op: Op, a: Var, b: Var) -> Result<Var> {
        let value = self.eval(&op)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(op, value, rg))
    }

    fn eval(&self, op: &Op) -> Result<Matrix> {
        eval_op(op, |v| &self.nodes[v.0].value)
    }

    /// Recomputes every node from the recorded leaves and constants.
    pub fn replay(&self) -> Result<Vec<Matrix>> {
        let mut values: Vec<Matrix> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Leaf | Op::Constant => node.value.clone(),
                ref op => eval_op(op, |v| &values[v.0])?,
            };
            values.push(v);
        }
        Ok(values)
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {}x{}",
                lv.rows(),
                lv.cols()
            )));
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(Matrix::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            self.propagate(node, &g, &mut adj)?;
            adj[i] = Some(g);
        }
        Ok(Gradients {
            adjoints: adj,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn propagate(&self, node: &Node, g: &Matrix, adj: &mut [Option<Matrix>]) -> Result<()> {
        let val = |v: Var| &self.nodes[v.0].value;
        let mut send = |v: Var, contrib: Matrix| -> Result<()> {
            if !self.nodes[v.0].requires_grad {
                return Ok(());
            }
            match &mut adj[v.0] {
                Some(acc) => acc.axpy(1.0, &contrib),
                slot @ None => {
                    *slot = Some(contrib);
                    Ok(())
                }
            }
        };
        match &node.op {
            Op::Leaf | Op::Constant | Op::StopGradient(_) => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    send(*a, g.matmul_t(val(*b))?)?;
                }
                if self.rg(*b) {
                    send(*b, val(*a).t_matmul(g)?)?;
                }
            }
            Op::Transpose(a) => send(*a, g.transpose())?,
            Op::Add(a, b) => {
                send(*a, g.clone())?;
                send(*b, g.clone())?;
            }
            Op::Sub(a, b) => {
                send(*a, g.clone())?;
                send(*b, g.scale(-1.0))?;
            }
            Op::AddRow(a, row) => {
                send(*a, g.clone())?;
                if self.rg(*row) {
                    send(*row, g.col_sums())?;
                }
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    send(*a, g.hadamard(val(*b))?)?;
                }
                if self.rg(*b) {
                    send(*b, g.hadamard(val(*a))?)?;
                }
            }
            Op::Scale(a, s) => send(*a, g.scale(*s))?,
            Op::Relu(a) => {
                let gx = g.zip_with(val(*a), "relu'", |g, x| if x > 0.0 { g } else { 0.0 })?;
                send(*a, gx)?;
            }
            Op::Clamp(a, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                let gx = g.zip_with(val(*a), "clamp'", |g, x| if x > lo && x < hi { g } else { 0.0 })?;
                send(*a, gx)?;
            }
            Op::Concat(a, b) => {
                let wa = val(*a).cols();
                let wb = val(*b).cols();
                if self.rg(*a) {
                    send(*a, g.col_block(0, wa)?)?;
                }
                if self.rg(*b) {
                    send(*b, g.col_block(wa, wb)?)?;
                }
            }
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                send(*a, Matrix::filled(r, c, g.item()?))?;
            }
            Op::MeanSquare(a, b) => {
                let n = val(*a).len().max(1) as f64;
                let k = 2.0 * g.item()? / n;
                let diff = val(*a).sub(val(*b))?;
                if self.rg(*a) {
                    send(*a, diff.scale(k))?;
                }
                if self.rg(*b) {
                    send(*b, diff.scale(-k))?;
                }
            }
            Op::NormalCdf(a, sigma) => {
                let s = *sigma;
                let gx = g.zip_with(val(*a), "cdf'", |g, x| g * normal_pdf(x / s) / s)?;
                send(*a, gx)?;
            }
            Op::RowSoftmax(a) => {
                // dL/dx_j = y_j (g_j - Σ_i g_i y_i), row by row.
                let y = &node.value;
                let mut gx = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((o, &yj), &gj) in gx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o = yj * (gj - dot);
                    }
                }
                send(*a, gx)?;
            }
            Op::BceWithLogits(logits, targets) => {
                let n = targets.len().max(1) as f64;
                let k = g.item()? / n;
                let gx = val(*logits).zip_with(targets, "bce'", |z, t| k * (sigmoid(z) - t))?;
                send(*logits, gx)?;
            }
            Op::SoftmaxCrossEntropy(logits, labels) => {
                let z = val(*logits);
                let n = labels.len().max(1) as f64;
                let k = g.item()? / n;
                let mut gx = softmax_rows(z);
                for (r, &y) in labels.iter().enumerate() {
                    gx.row_mut(r)[y] -= 1.0;
                }
                send(*logits, gx.scale(k))?;
            }
        }
        Ok(())
    }
}

fn eval_op<'a>(op: &Op, val: impl Fn(Var) -> &'a Matrix) -> Result<Matrix> {
    Ok(match op {
        Op::Leaf | Op::Constant => unreachable!("leaves carry their own values"),
        Op::MatMul(a, b) => val(*a).matmul(val(*b))?,
        Op::Transpose(a) => val(*a).transpose(),
        Op::Add(a, b) => val(*a).add(val(*b))?,
        Op::Sub(a, b) => val(*a).sub(val(*b))?,
        Op::AddRow(a, row) => val(*a).add_row(val(*row))?,
        Op::Mul(a, b) => val(*a).hadamard(val(*b))?,
        Op::Scale(a, s) => val(*a).scale(*s),
        Op::Relu(a) => val(*a).map(|x| x.max(0.0)),
        Op::Clamp(a, lo, hi) => {
            let (lo, hi) = (*lo, *hi);
            val(*a).map(|x| x.max(lo).min(hi))
        }
        Op::Concat(a, b) => val(*a).hcat(val(*b))?,
        Op::StopGradient(a) => val(*a).clone(),
        Op::Sum(a) => Matrix::scalar(val(*a).sum()),
        Op::MeanSquare(a, b) => {
            let (x, y) = (val(*a), val(*b));
            x.expect_same_shape(y, "mean_square")?;
            let n = x.len().max(1) as f64;
            let s: f64 = x.data().iter().zip(y.data()).map(|(p, q)| (p - q) * (p - q)).sum();
            Matrix::scalar(s / n)
        }
        Op::NormalCdf(a, sigma) => {
            let s = *sigma;
            val(*a).map(|x| normal_cdf(x / s))
        }
        Op::RowSoftmax(a) => softmax_rows(val(*a)),
        Op::BceWithLogits(logits, targets) => {
            let z = val(*logits);
            z.expect_same_shape(targets, "bce_with_logits")?;
            let n = z.len().max(1) as f64;
            let s: f64 = z
                .data()
                .iter()
                .zip(targets.data())
                .map(|(&z, &t)| z.max(0.0) - z * t + (-z.abs()).exp().ln_1p())
                .sum();
            Matrix::scalar(s / n)
        }
        Op::SoftmaxCrossEntropy(logits, labels) => {
            let z = val(*logits);
            if labels.len() != z.rows() {
                return Err(Error::Shape {
                    op: "softmax_cross_entropy",
                    lhs: z.shape(),
                    rhs: (labels.len(), 1),
                });
            }
            let mut s = 0.0;
            for (r, &y) in labels.iter().enumerate() {
                let row = z.row(r);
                if y >= row.len() {
                    return Err(Error::Contract(format!(
                        "label {y} out of range for {} classes",
                        row.len()
                    )));
                }
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                s += lse - row[y];
            }
            Matrix::scalar(s / labels.len().max(1) as f64)
        }
    })
}

pub(crate) fn softmax_rows(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
