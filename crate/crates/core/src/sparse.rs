//! Compressed sparse row matrices.
//!
//! Used for adjacency (boolean matrices store 1.0), normalized propagation
//! matrices, and sparse model inputs. Column indices inside each row are kept
//! sorted and unique.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from per-row entry lists. Entries inside a row are
    /// sorted by column; duplicate columns are summed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            let start = indices.len();
            for (c, v) in row {
                if c >= cols {
                    return Err(Error::Shape {
                        op: "SparseMatrix::from_rows",
                        detail: format!("column {c} out of range {cols} in row {r}"),
                    });
                }
                if indices.len() > start && *indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(SparseMatrix {
            rows: n,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds a boolean pattern matrix (all stored values 1.0) from raw CSR
    /// arrays. Each row's indices must be sorted, unique and in range.
    pub fn pattern(rows: usize, cols: usize, indptr: Vec<usize>, indices: Vec<usize>) -> Self {
        debug_assert_eq!(indptr.len(), rows + 1);
        debug_assert!(indices.iter().all(|&c| c < cols));
        let nnz = indices.len();
        SparseMatrix {
            rows,
            cols,
            indptr,
            indices,
            values: vec![1.0; nnz],
        }
    }

    /// Keeps the nonzero entries of a dense matrix.
    pub fn from_dense(dense: ArrayView2<'_, f64>) -> Self {
        let (rows, cols) = dense.dim();
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in dense.axis_iter(Axis(0)) {
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        SparseMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row_indices(&self, r: usize) -> &[usize] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn row_values(&self, r: usize) -> &[f64] {
        &self.values[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.indptr[r + 1] - self.indptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let idx = self.row_indices(r);
        match idx.binary_search(&c) {
            Ok(k) => self.row_values(r)[k],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            self.row_indices(r)
                .iter()
                .zip(self.row_values(r))
                .map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for (r, c, v) in self.iter() {
            out[[r, c]] = v;
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for (r, c, v) in self.iter() {
            let slot = next[c];
            indices[slot] = r;
            values[slot] = v;
            next[c] += 1;
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }

    /// `self · dense`. Rows are computed independently, so the result does
    /// not depend on the thread count.
    pub fn spmm(&self, dense: &Array2<f64>) -> Result<Array2<f64>> {
        if dense.nrows() != self.cols {
            return Err(Error::Shape {
                op: "spmm",
                detail: format!(
                    "({}x{}) * ({}x{})",
                    self.rows,
                    self.cols,
                    dense.nrows(),
                    dense.ncols()
                ),
            });
        }
        let mut out = Array2::zeros((self.rows, dense.ncols()));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(r, mut out_row)| {
                for (&c, &v) in self.row_indices(r).iter().zip(self.row_values(r)) {
                    out_row.scaled_add(v, &dense.row(c));
                }
            });
        Ok(out)
    }

    /// `selfᵀ · dense` without materializing the transpose.
    pub fn spmm_transpose(&self, dense: &Array2<f64>) -> Result<Array2<f64>> {
        if dense.nrows() != self.rows {
            return Err(Error::Shape {
                op: "spmm_transpose",
                detail: format!(
                    "({}x{})ᵀ * ({}x{})",
                    self.rows,
                    self.cols,
                    dense.nrows(),
                    dense.ncols()
                ),
            });
        }
        let mut out = Array2::zeros((self.cols, dense.ncols()));
        for r in 0..self.rows {
            let src = dense.row(r);
            for (&c, &v) in self.row_indices(r).iter().zip(self.row_values(r)) {
                out.row_mut(c).scaled_add(v, &src);
            }
        }
        Ok(out)
    }

    /// Horizontal concatenation of blocks, each multiplied by a scalar.
    pub fn hstack_scaled(blocks: &[(&SparseMatrix, f64)]) -> Result<SparseMatrix> {
        let Some((first, _)) = blocks.first() else {
            return Err(Error::Shape {
                op: "hstack",
                detail: "no blocks".into(),
            });
        };
        let rows = first.rows;
        if let Some((b, _)) = blocks.iter().find(|(b, _)| b.rows != rows) {
            return Err(Error::Shape {
                op: "hstack",
                detail: format!("row counts {} and {}", rows, b.rows),
            });
        }
        let cols = blocks.iter().map(|(b, _)| b.cols).sum();
        let nnz = blocks.iter().map(|(b, _)| b.nnz()).sum();
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for r in 0..rows {
            let mut offset = 0;
            for (block, scale) in blocks {
                for (&c, &v) in block.row_indices(r).iter().zip(block.row_values(r)) {
                    indices.push(offset + c);
                    values.push(scale * v);
                }
                offset += block.cols;
            }
            indptr.push(indices.len());
        }
        Ok(SparseMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Zeroes each stored entry with probability `rate` and rescales the
    /// survivors by `1 / (1 - rate)`. Matches dense inverted dropout on the
    /// nonzero pattern.
    pub fn dropout<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> SparseMatrix {
        if rate <= 0.0 {
            return self.clone();
        }
        let keep = 1.0 - rate;
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..self.rows {
            for (&c, &v) in self.row_indices(r).iter().zip(self.row_values(r)) {
                if rng.random::<f64>() < keep {
                    indices.push(c);
                    values.push(v / keep);
                }
            }
            indptr.push(indices.len());
        }
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    /// Applies `f(row, col, value)` to every stored value, keeping the pattern.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> SparseMatrix {
        let mut values = Vec::with_capacity(self.nnz());
        for (r, c, v) in self.iter() {
            values.push(f(r, c, v));
        }
        SparseMatrix {
            values,
            ..self.clone()
        }
    }
}
