//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every operation as a node whose inputs have smaller
//! indices, so walking the node list backwards is a reverse topological
//! order. Each forward op checks its output for NaN/Inf.
//!
//! ```
//! use msi_gnn::autodiff::Tape;
//! use ndarray::array;
//!
//! let mut tape = Tape::new();
//! let w = tape.param(array![[1.0, 2.0], [3.0, 4.0]]);
//! let loss = tape.sum(w).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(w).unwrap(), &array![[1.0, 1.0], [1.0, 1.0]]);
//! ```

mod adam;
mod params;

pub use adam::{Adam, AdamConfig};
pub use params::{glorot_uniform, ParamStore, Parameter};

use std::sync::Arc;

use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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
    SpMM(Arc<SparseMatrix>, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Dropout(Var, Array2<f64>),
    ConcatCols(Vec<Var>),
    Sum(Var),
    SoftmaxCrossEntropy {
        logits: Var,
        probs: Array2<f64>,
        labels: Vec<usize>,
        rows: Vec<usize>,
    },
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by leaf handle.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Array2<f64>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros of `shape` when no path reached it.
    pub fn get_or_zeros(&self, var: Var, shape: (usize, usize)) -> Array2<f64> {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Array2::zeros(shape))
    }
}

fn shape_err(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Shape {
        op,
        detail: format!("{}x{} vs {}x{}", a.0, a.1, b.0, b.1),
    }
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

    pub fn value(&self, var: Var) -> &Array2<f64> {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> (usize, usize) {
        self.nodes[var.0].value.dim()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push_raw(value, Op::Leaf, false)
    }

    fn push_raw(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(
        &mut self,
        name: &'static str,
        value: Array2<f64>,
        op: Op,
        needs_grad: bool,
    ) -> Result<Var> {
        if !value.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite(name));
        }
        Ok(self.push_raw(value, op, needs_grad))
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.0].needs_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(shape_err("matmul", sa, sb));
        }
        let value = self.value(a).dot(self.value(b));
        let needs = self.needs(a) || self.needs(b);
        self.push("matmul", value, Op::MatMul(a, b), needs)
    }

    /// `sparse · dense`. The sparse operand is a constant.
    pub fn spmm(&mut self, sparse: &Arc<SparseMatrix>, dense: Var) -> Result<Var> {
        let value = sparse.spmm(self.value(dense))?;
        let needs = self.needs(dense);
        self.push("spmm", value, Op::SpMM(Arc::clone(sparse), dense), needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(shape_err("add", sa, sb));
        }
        let value = self.value(a) + self.value(b);
        let needs = self.needs(a) || self.needs(b);
        self.push("add", value, Op::Add(a, b), needs)
    }

    /// Adds a `1×C` row (bias) to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (sx, sr) = (self.shape(x), self.shape(row));
        if sr.0 != 1 || sr.1 != sx.1 {
            return Err(shape_err("add_row", sx, sr));
        }
        let value = self.value(x) + &self.value(row).row(0);
        let needs = self.needs(x) || self.needs(row);
        self.push("add_row", value, Op::AddRow(x, row), needs)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let value = self.value(x) * factor;
        let needs = self.needs(x);
        self.push("scale", value, Op::Scale(x, factor), needs)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).mapv(|v| v.max(0.0));
        let needs = self.needs(x);
        self.push("relu", value, Op::Relu(x), needs)
    }

    /// Inverted dropout. Identity when `training` is false or `rate` is 0;
    /// no random numbers are drawn in that case.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - rate;
        let mask = Array2::from_shape_simple_fn(self.shape(x), || {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let value = self.value(x) * &mask;
        let needs = self.needs(x);
        self.push("dropout", value, Op::Dropout(x, mask), needs)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Shape {
                op: "concat_cols",
                detail: "no inputs".into(),
            });
        };
        let rows = self.shape(first).0;
        if let Some(&bad) = parts.iter().find(|&&p| self.shape(p).0 != rows) {
            return Err(shape_err("concat_cols", self.shape(first), self.shape(bad)));
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(1), &views).expect("row counts checked");
        let needs = parts.iter().any(|&p| self.needs(p));
        self.push("concat_cols", value, Op::ConcatCols(parts.to_vec()), needs)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Array2::from_elem((1, 1), self.value(x).sum());
        let needs = self.needs(x);
        self.push("sum", value, Op::Sum(x), needs)
    }

    /// Mean softmax cross-entropy over the rows listed in `rows`.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        rows: &[usize],
    ) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::EmptyMask("softmax_cross_entropy"));
        }
        let z = self.value(logits);
        let (n, c) = z.dim();
        if labels.len() != n {
            return Err(Error::Shape {
                op: "softmax_cross_entropy",
                detail: format!("{} labels for {n} rows", labels.len()),
            });
        }
        let probs = softmax_rows(z);
        let mut loss = 0.0;
        for &r in rows {
            let y = labels[r];
            if y >= c {
                return Err(Error::Shape {
                    op: "softmax_cross_entropy",
                    detail: format!("label {y} with {c} classes"),
                });
            }
            let row = z.row(r);
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let log_sum = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
            loss += log_sum - z[[r, y]];
        }
        loss /= rows.len() as f64;
        let needs = self.needs(logits);
        self.push(
            "softmax_cross_entropy",
            Array2::from_elem((1, 1), loss),
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                labels: labels.to_vec(),
                rows: rows.to_vec(),
            },
            needs,
        )
    }

    /// Propagates gradients from a scalar `loss`. A tape can be differentiated
    /// once; rerun the forward pass on a new tape before calling it again.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::BackwardTwice);
        }
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape.0, shape.1));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(&node.op, &node.value, g, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Array2<f64>>], var: Var, delta: Array2<f64>) {
        if !self.needs(var) {
            return;
        }
        match &mut grads[var.0] {
            Some(existing) => *existing += &delta,
            slot => *slot = Some(delta),
        }
    }

    fn propagate(
        &self,
        op: &Op,
        out_value: &Array2<f64>,
        g: Array2<f64>,
        grads: &mut [Option<Array2<f64>>],
    ) -> Result<()> {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    let da = g.dot(&self.value(*b).t());
                    self.accumulate(grads, *a, da);
                }
                if self.needs(*b) {
                    let db = self.value(*a).t().dot(&g);
                    self.accumulate(grads, *b, db);
                }
            }
            Op::SpMM(sparse, dense) => {
                let dd = sparse.spmm_transpose(&g)?;
                self.accumulate(grads, *dense, dd);
            }
            Op::Add(a, b) => {
                if self.needs(*b) {
                    self.accumulate(grads, *b, g.clone());
                }
                self.accumulate(grads, *a, g);
            }
            Op::AddRow(x, row) => {
                if self.needs(*row) {
                    let dr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    self.accumulate(grads, *row, dr);
                }
                self.accumulate(grads, *x, g);
            }
            Op::Scale(x, factor) => self.accumulate(grads, *x, g * *factor),
            Op::Relu(x) => {
                let mut d = g;
                d.zip_mut_with(out_value, |gv, &out| {
                    if out <= 0.0 {
                        *gv = 0.0;
                    }
                });
                self.accumulate(grads, *x, d);
            }
            Op::Dropout(x, mask) => self.accumulate(grads, *x, g * mask),
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let width = self.shape(p).1;
                    if self.needs(p) {
                        let piece = g.slice(s![.., offset..offset + width]).to_owned();
                        self.accumulate(grads, p, piece);
                    }
                    offset += width;
                }
            }
            Op::Sum(x) => {
                let fill = g[[0, 0]];
                let d = Array2::from_elem(self.shape(*x), fill);
                self.accumulate(grads, *x, d);
            }
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                labels,
                rows,
            } => {
                let scale = g[[0, 0]] / rows.len() as f64;
                let mut d = Array2::zeros(probs.dim());
                for &r in rows {
                    let mut row = d.row_mut(r);
                    row.scaled_add(scale, &probs.row(r));
                    row[labels[r]] -= scale;
                }
                self.accumulate(grads, *logits, d);
            }
        }
        Ok(())
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
    out
}
