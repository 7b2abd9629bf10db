//! Information gain ratio scoring of hop-adjacency columns and the
//! sort / slice / occurrence-filter selection built on it.
//!
//! Column `u` of `A_i` splits the labeled set into the nodes adjacent to `u`
//! at hop `i` and the rest. Its score is the C4.5 gain ratio of that binary
//! split with respect to the class labels.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hop::HopAdjacency;
use crate::sparse::SparseMatrix;

/// Shannon entropy (bits) of a class-count histogram. `0·log 0 = 0`.
pub fn entropy(class_counts: &[usize]) -> Result<f64> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::Config("entropy of an empty histogram".into()));
    }
    Ok(entropy_with_total(class_counts.iter().copied(), total))
}

fn entropy_with_total(counts: impl Iterator<Item = usize>, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    // summing in sorted order makes histograms that differ only by a class
    // relabeling produce bitwise-equal entropies, so their scores tie exactly
    let mut nonzero: Vec<usize> = counts.filter(|&c| c > 0).collect();
    nonzero.sort_unstable();
    let h: f64 = nonzero
        .into_iter()
        .map(|c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

/// Entropy of the two-way split with fractions `p` and `q = 1 - p`, both
/// passed explicitly so that a split and its mirror image score identically.
fn split_entropy(p: f64, q: f64) -> f64 {
    if p <= 0.0 || q <= 0.0 {
        0.0
    } else {
        -(p * p.log2() + q * q.log2())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgrScore {
    pub column_node: usize,
    pub score: f64,
    /// Number of labeled nodes adjacent to `column_node` at this hop.
    pub occurrence: usize,
}

/// Class histogram of the labeled set, shared by every column score.
#[derive(Debug, Clone)]
pub struct LabelStats {
    is_labeled: Vec<bool>,
    class_totals: Vec<usize>,
    total: usize,
}

impl LabelStats {
    pub fn new(labels: &[usize], labeled_set: &[usize], num_classes: usize) -> Result<Self> {
        if labeled_set.is_empty() {
            return Err(Error::Config("labeled set is empty".into()));
        }
        let mut is_labeled = vec![false; labels.len()];
        let mut class_totals = vec![0usize; num_classes];
        for &v in labeled_set {
            if v >= labels.len() || labels[v] >= num_classes {
                return Err(Error::Config(format!("labeled node {v} is out of range")));
            }
            if !is_labeled[v] {
                is_labeled[v] = true;
                class_totals[labels[v]] += 1;
            }
        }
        let total = class_totals.iter().sum();
        // rejects an empty histogram
        entropy(&class_totals)?;
        Ok(LabelStats {
            is_labeled,
            class_totals,
            total,
        })
    }

    pub fn num_labeled(&self) -> usize {
        self.total
    }
}

/// Resolution of stored scores. Distinct entropy sums can be mathematically
/// equal (e.g. `3·h(1/3) + 5·h(2/5) = 4·h(1/2) + 5·h(1/5)`) yet differ in the
/// last bits; rounding to a fixed grid makes such ties exact so that the
/// node-id tie-break applies.
pub const SCORE_RESOLUTION: f64 = 1e-12;

fn quantize(score: f64) -> f64 {
    (score / SCORE_RESOLUTION).round() * SCORE_RESOLUTION
}

/// Scores one column given the nodes it is adjacent to (its support).
pub fn igr_score(
    column_node: usize,
    support: &[usize],
    labels: &[usize],
    stats: &LabelStats,
) -> IgrScore {
    let mut inside = vec![0usize; stats.class_totals.len()];
    let mut occurrence = 0;
    for &v in support {
        if stats.is_labeled[v] {
            inside[labels[v]] += 1;
            occurrence += 1;
        }
    }
    let total = stats.total;
    let score = if occurrence == 0 || occurrence == total {
        0.0
    } else {
        // gain = H(Y) - H(Y|S) = H(S) - H(S|Y), so the ratio is
        // 1 - H(S|Y)/H(S). This form is exactly 1 whenever the split follows
        // class boundaries, and exactly equal for mirrored or relabeled splits.
        let split_info = split_entropy(
            occurrence as f64 / total as f64,
            (total - occurrence) as f64 / total as f64,
        );
        let mut terms: Vec<f64> = stats
            .class_totals
            .iter()
            .zip(&inside)
            .filter(|(&all, _)| all > 0)
            .map(|(&all, &inn)| {
                let n = all as f64;
                let h = split_entropy(inn as f64 / n, (all - inn) as f64 / n);
                n / total as f64 * h
            })
            .collect();
        terms.sort_by(f64::total_cmp);
        let conditional: f64 = terms.into_iter().sum();
        if split_info > 0.0 {
            quantize((1.0 - conditional / split_info).max(0.0))
        } else {
            0.0
        }
    };
    IgrScore {
        column_node,
        score,
        occurrence,
    }
}

/// Scores every column of a hop matrix, in column order.
pub fn score_columns(hop: &HopAdjacency, labels: &[usize], stats: &LabelStats) -> Vec<IgrScore> {
    // A_i is symmetric, so column u is row u.
    (0..hop.num_nodes())
        .into_par_iter()
        .map(|u| igr_score(u, hop.neighbors(u), labels, stats))
        .collect()
}

/// Descending score, ties broken by ascending node id.
pub fn rank_scores(scores: &mut [IgrScore]) {
    scores.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.column_node.cmp(&b.column_node))
    });
}

/// The columns of `A_i` kept after ranking, slicing to `t` and filtering
/// by occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedStructure {
    pub hop: usize,
    /// Surviving columns in ranking order.
    pub columns: Vec<IgrScore>,
    /// |V|×t_i boolean matrix; column `j` is column `columns[j]` of `A_i`.
    pub matrix: SparseMatrix,
}

impl SelectedStructure {
    pub fn column_nodes(&self) -> Vec<usize> {
        self.columns.iter().map(|c| c.column_node).collect()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Wraps an arbitrary |V|×k matrix as a structure block, e.g. for
    /// synthetic blocks in ablation studies.
    pub fn from_matrix(hop: usize, matrix: SparseMatrix) -> Self {
        let columns = (0..matrix.cols())
            .map(|c| IgrScore {
                column_node: c,
                score: 0.0,
                occurrence: 0,
            })
            .collect();
        SelectedStructure {
            hop,
            columns,
            matrix,
        }
    }
}

/// Ranks all columns, keeps the first `min(t, |V|)`, then drops columns
/// whose occurrence is `<= n`. May return zero columns.
pub fn select_columns(
    hop: &HopAdjacency,
    labels: &[usize],
    stats: &LabelStats,
    t: usize,
    n: usize,
) -> Result<SelectedStructure> {
    if t == 0 {
        return Err(Error::Config("selection size t must be at least 1".into()));
    }
    let mut scores = score_columns(hop, labels, stats);
    rank_scores(&mut scores);
    scores.truncate(t);
    scores.retain(|s| s.occurrence > n);

    let num_nodes = hop.num_nodes();
    let mut position = vec![usize::MAX; num_nodes];
    for (j, s) in scores.iter().enumerate() {
        position[s.column_node] = j;
    }
    let rows = (0..num_nodes)
        .map(|v| {
            hop.neighbors(v)
                .iter()
                .filter(|&&u| position[u] != usize::MAX)
                .map(|&u| (position[u], 1.0))
                .collect()
        })
        .collect();
    let matrix = SparseMatrix::from_rows(scores.len(), rows)?;
    Ok(SelectedStructure {
        hop: hop.hop,
        columns: scores,
        matrix,
    })
}

/// Writes `node_id,score,occurrence` rows.
pub fn write_rankings_csv(w: &mut impl Write, scores: &[IgrScore]) -> std::io::Result<()> {
    writeln!(w, "node_id,score,occurrence")?;
    for s in scores {
        writeln!(w, "{},{},{}", s.column_node, s.score, s.occurrence)?;
    }
    Ok(())
}
