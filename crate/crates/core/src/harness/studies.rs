//! Ablation studies: duplicated useful/noise feature blocks, and the `t`/`λ`
//! sensitivity sweep.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::igr::{igr_score, rank_scores, LabelStats};
use crate::models::ModelConfig;
use crate::rng::{derive_seed, seeded};
use crate::sparse::SparseMatrix;
use crate::split::SplitMasks;

use super::evaluate::{evaluate, mean_std, run_indexed, split_seed};
use super::train::{train_on_input, PreparedGraph, TrainConfig};

/// Indices of the `k` feature columns with the highest IGR over `labeled`,
/// treating a nonzero entry as presence.
pub fn useful_feature_columns(graph: &Graph, labeled: &[usize], k: usize) -> Result<Vec<usize>> {
    let stats = LabelStats::new(graph.labels(), labeled, graph.num_classes())?;
    let by_column = SparseMatrix::from_dense(graph.features().view()).transpose();
    let mut scores: Vec<_> = (0..by_column.rows())
        .map(|c| igr_score(c, by_column.row_indices(c), graph.labels(), &stats))
        .collect();
    rank_scores(&mut scores);
    Ok(scores.iter().take(k).map(|s| s.column_node).collect())
}

/// The listed columns of `matrix`, in the given order.
pub fn take_columns(matrix: &SparseMatrix, columns: &[usize]) -> SparseMatrix {
    let mut position = vec![usize::MAX; matrix.cols()];
    for (j, &c) in columns.iter().enumerate() {
        position[c] = j;
    }
    let rows = (0..matrix.rows())
        .map(|r| {
            matrix
                .row_indices(r)
                .iter()
                .zip(matrix.row_values(r))
                .filter(|(&c, _)| position[c] != usize::MAX)
                .map(|(&c, &v)| (position[c], v))
                .collect()
        })
        .collect();
    SparseMatrix::from_rows(columns.len(), rows).expect("positions are in range")
}

/// `rows × width` matrix of independent fair 0/1 draws.
pub fn random_binary_block<R: Rng + ?Sized>(
    rows: usize,
    width: usize,
    rng: &mut R,
) -> SparseMatrix {
    let rows = (0..rows)
        .map(|_| {
            (0..width)
                .filter(|_| rng.random::<bool>())
                .map(|c| (c, 1.0))
                .collect()
        })
        .collect();
    SparseMatrix::from_rows(width, rows).expect("columns are in range")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuplicationPoint {
    pub useful_copies: usize,
    pub noise_copies: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub failed_runs: usize,
}

/// Trains `config` (without MSI) on inputs made of `useful_copies` copies of
/// the top-`block_width` IGR feature columns and `noise_copies` copies of a
/// random 0/1 block of the same width, for every pair in the two lists.
/// Useful columns are chosen per split from its training nodes.
#[allow(clippy::too_many_arguments)]
pub fn duplication_study(
    prepared: &PreparedGraph,
    splits: &[SplitMasks],
    config: &ModelConfig,
    train: &TrainConfig,
    block_width: usize,
    useful_copies: &[usize],
    noise_copies: &[usize],
    jobs: usize,
) -> Result<Vec<DuplicationPoint>> {
    if config.msi.is_some() {
        return Err(Error::Config(
            "duplication study takes a plain model".into(),
        ));
    }
    config.validate()?;
    train.validate()?;
    let graph = &prepared.graph;
    let noise = random_binary_block(
        graph.num_nodes(),
        block_width,
        &mut seeded(derive_seed(train.seed, 77)),
    );
    let useful: Vec<SparseMatrix> = splits
        .iter()
        .map(|s| {
            let cols = useful_feature_columns(graph, &s.train, block_width)?;
            Ok(take_columns(&prepared.features, &cols))
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = useful_copies
        .iter()
        .flat_map(|&u| noise_copies.iter().map(move |&n| (u, n)))
        .collect();
    let points = run_indexed(jobs, pairs.len(), |i| {
        let (cu, cn) = pairs[i];
        let runs: Vec<Option<f64>> = splits
            .iter()
            .enumerate()
            .map(|(k, split)| {
                let mut blocks: Vec<(&SparseMatrix, f64)> = Vec::new();
                blocks.extend(std::iter::repeat_n((&useful[k], 1.0), cu));
                blocks.extend(std::iter::repeat_n((&noise, 1.0), cn));
                let input = Arc::new(SparseMatrix::hstack_scaled(&blocks)?);
                let run_train = TrainConfig {
                    seed: split_seed(train.seed, k),
                    ..*train
                };
                Ok(train_on_input(prepared, &input, split, config, &run_train)
                    .ok()
                    .map(|o| 100.0 * o.test_accuracy))
            })
            .collect::<Result<_>>()?;
        let accs: Vec<f64> = runs.iter().map(|a| a.unwrap_or(0.0)).collect();
        let (mean_accuracy, std_accuracy) = mean_std(&accs);
        Ok(DuplicationPoint {
            useful_copies: cu,
            noise_copies: cn,
            mean_accuracy,
            std_accuracy,
            failed_runs: runs.iter().filter(|a| a.is_none()).count(),
        })
    });
    points.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t: usize,
    pub lambda: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub failed_runs: usize,
}

/// Evaluates an MSI config at every `(t, λ)` pair, all other settings fixed.
pub fn parameter_sweep(
    prepared: &PreparedGraph,
    splits: &[SplitMasks],
    base: &ModelConfig,
    ts: &[usize],
    lambdas: &[f64],
    train: &TrainConfig,
    jobs: usize,
) -> Result<Vec<SweepPoint>> {
    let Some(msi) = &base.msi else {
        return Err(Error::Config("parameter sweep needs an MSI model".into()));
    };
    let mut points = Vec::new();
    for &t in ts {
        for &lambda in lambdas {
            let mut config = base.clone();
            config.msi = Some(crate::msi::MsiConfig {
                t,
                lambda,
                ..msi.clone()
            });
            let result = evaluate(prepared, splits, &config, train, jobs)?.result;
            points.push(SweepPoint {
                t,
                lambda,
                mean_accuracy: result.mean_accuracy,
                std_accuracy: result.std_accuracy,
                failed_runs: result.failed_runs,
            });
        }
    }
    Ok(points)
}
