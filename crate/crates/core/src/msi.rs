//! MSI input layers: feature and selected-structure blocks, each duplicated
//! by its combined number and hop `i` blocks scaled by `λ^(i-1)`.
//!
//! Row layout for node `v`:
//!
//! ```text
//! [X_v]^{c_X} ‖ [S_{v,1}]^{c_A1} ‖ λ·[S_{v,2}]^{c_A2} ‖ … ‖ λ^{m-1}·[S_{v,m}]^{c_Am}
//! ```
//!
//! A combined number of zero omits the block.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hop::HopAdjacency;
use crate::igr::{select_columns, LabelStats, SelectedStructure};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsiConfig {
    /// Selection size per hop.
    pub t: usize,
    /// Occurrence threshold: columns adjacent to `<= n` labeled nodes are dropped.
    pub n: usize,
    /// Discount coefficient in `[0, 1]`.
    pub lambda: f64,
    pub c_x: usize,
    /// Combined numbers for hops `1..=m`; `m = c_a.len()`.
    pub c_a: Vec<usize>,
}

impl MsiConfig {
    pub fn max_hop(&self) -> usize {
        self.c_a.len()
    }

    /// `c_X = 1` and every `c_Ai = 0`: the layer is the raw feature matrix.
    pub fn is_identity(&self) -> bool {
        self.c_x == 1 && self.c_a.iter().all(|&c| c == 0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_a.is_empty() {
            return Err(Error::Config("MSI needs at least one hop".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "discount coefficient {} outside [0, 1]",
                self.lambda
            )));
        }
        if self.t == 0 {
            return Err(Error::Config("selection size t must be at least 1".into()));
        }
        if self.c_x == 0 && self.c_a.iter().all(|&c| c == 0) {
            return Err(Error::Config("all combined numbers are zero".into()));
        }
        Ok(())
    }

    /// `λ^(i-1)` for hop `i`.
    pub fn discount(&self, hop: usize) -> f64 {
        self.lambda.powi(hop as i32 - 1)
    }

    /// Output width `c_X·F + Σ c_Ai·t_i`.
    pub fn width(&self, feature_dim: usize, selected: &[SelectedStructure]) -> usize {
        self.c_x * feature_dim
            + self
                .c_a
                .iter()
                .zip(selected)
                .map(|(&c, s)| c * s.width())
                .sum::<usize>()
    }
}

fn check_inputs(
    feature_rows: Option<usize>,
    selected: &[SelectedStructure],
    config: &MsiConfig,
) -> Result<()> {
    config.validate()?;
    if selected.len() < config.max_hop() {
        return Err(Error::Config(format!(
            "{} selected hops supplied, configuration needs {}",
            selected.len(),
            config.max_hop()
        )));
    }
    if config.c_x > 0 && feature_rows.is_none() {
        return Err(Error::Config(
            "c_X > 0 but no feature matrix supplied".into(),
        ));
    }
    let rows = feature_rows.or_else(|| selected.first().map(|s| s.matrix.rows()));
    if let Some(rows) = rows {
        if let Some(bad) = selected[..config.max_hop()]
            .iter()
            .find(|s| s.matrix.rows() != rows)
        {
            return Err(Error::Shape {
                op: "build_msi_layer",
                detail: format!(
                    "hop {} has {} rows, expected {rows}",
                    bad.hop,
                    bad.matrix.rows()
                ),
            });
        }
    }
    Ok(())
}

/// Dense MSI layer.
pub fn build_msi_layer(
    features: Option<&Array2<f64>>,
    selected: &[SelectedStructure],
    config: &MsiConfig,
) -> Result<Array2<f64>> {
    check_inputs(features.map(|f| f.nrows()), selected, config)?;
    let feature_dim = features.map_or(0, |f| f.ncols());
    let width = config.width(feature_dim, selected);
    if width == 0 {
        return Err(Error::Config("MSI layer would have zero width".into()));
    }
    let rows = features.map_or_else(|| selected[0].matrix.rows(), |f| f.nrows());
    let mut out = Array2::zeros((rows, width));
    let mut offset = 0;
    if let Some(x) = features {
        for _ in 0..config.c_x {
            out.slice_mut(s![.., offset..offset + feature_dim])
                .assign(x);
            offset += feature_dim;
        }
    }
    for (i, (&copies, sel)) in config.c_a.iter().zip(selected).enumerate() {
        let scale = config.discount(i + 1);
        let block = sel.matrix.to_dense() * scale;
        for _ in 0..copies {
            out.slice_mut(s![.., offset..offset + sel.width()])
                .assign(&block);
            offset += sel.width();
        }
    }
    debug_assert_eq!(offset, width);
    Ok(out)
}

/// Same layer as [`build_msi_layer`], assembled directly in sparse form.
pub fn build_msi_layer_sparse(
    features: Option<&SparseMatrix>,
    selected: &[SelectedStructure],
    config: &MsiConfig,
) -> Result<SparseMatrix> {
    check_inputs(features.map(|f| f.rows()), selected, config)?;
    let mut blocks: Vec<(&SparseMatrix, f64)> = Vec::new();
    if let Some(x) = features {
        blocks.extend(std::iter::repeat_n((x, 1.0), config.c_x));
    }
    for (i, (&copies, sel)) in config.c_a.iter().zip(selected).enumerate() {
        blocks.extend(std::iter::repeat_n(
            (&sel.matrix, config.discount(i + 1)),
            copies,
        ));
    }
    if blocks.iter().map(|(b, _)| b.cols()).sum::<usize>() == 0 {
        return Err(Error::Config("MSI layer would have zero width".into()));
    }
    SparseMatrix::hstack_scaled(&blocks)
}

/// Selects columns for hops `1..=m` using the labels of `labeled_set`.
/// `hops` must hold at least `m` matrices.
pub fn select_structures(
    graph: &Graph,
    hops: &[HopAdjacency],
    labeled_set: &[usize],
    config: &MsiConfig,
) -> Result<Vec<SelectedStructure>> {
    let m = config.max_hop();
    if hops.len() < m {
        return Err(Error::Config(format!(
            "{} hop matrices available, {m} needed",
            hops.len()
        )));
    }
    let stats = LabelStats::new(graph.labels(), labeled_set, graph.num_classes())?;
    hops[..m]
        .iter()
        .zip(&config.c_a)
        .map(|(hop, &copies)| {
            if copies == 0 {
                // unused block; skip the scoring work
                Ok(SelectedStructure {
                    hop: hop.hop,
                    columns: Vec::new(),
                    matrix: SparseMatrix::zeros(graph.num_nodes(), 0),
                })
            } else {
                select_columns(hop, graph.labels(), &stats, config.t, config.n)
            }
        })
        .collect()
}
