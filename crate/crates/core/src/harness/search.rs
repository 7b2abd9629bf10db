use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Activation, ModelConfig, ModelKind};
use crate::msi::MsiConfig;
use crate::split::SplitMasks;

use super::evaluate::{evaluate, run_indexed};
use super::train::{PreparedGraph, TrainConfig};

/// Hyperparameter grids for the two-stage search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dropout: Vec<f64>,
    pub weight_decay: Vec<f64>,
    /// Searched for H2GCN only; other families keep their fixed activation.
    pub activation: Vec<Activation>,
    pub c_x: Vec<usize>,
    /// Values tried for each `c_Ai`.
    pub c_a: Vec<usize>,
    /// Number of structural hops `m`.
    pub hops: usize,
    pub n: usize,
    pub stage1_t: usize,
    pub stage1_lambda: f64,
    pub stage2_t: Vec<usize>,
    pub stage2_lambda: Vec<f64>,
}

impl SearchSpace {
    /// The published grids. Citation graphs use `c_Ai ∈ {0, 1}`, the others
    /// `{0, 1, 4, 8}`.
    pub fn standard(citation: bool) -> Self {
        SearchSpace {
            dropout: vec![0.0, 0.5],
            weight_decay: vec![5e-4, 1e-5],
            activation: vec![Activation::Relu, Activation::None],
            c_x: vec![0, 1],
            c_a: if citation {
                vec![0, 1]
            } else {
                vec![0, 1, 4, 8]
            },
            hops: 2,
            n: 1,
            stage1_t: 1000,
            stage1_lambda: 0.5,
            stage2_t: vec![10, 100, 1000],
            stage2_lambda: vec![0.1, 0.5, 1.0],
        }
    }

    /// Every `(c_X, [c_A1..c_Am])` combination except the all-zero one, in
    /// lexicographic order.
    pub fn combined_numbers(&self) -> Vec<(usize, Vec<usize>)> {
        let mut out = Vec::new();
        let mut current = vec![0usize; self.hops];
        for &cx in &self.c_x {
            self.fill_combinations(0, &mut current, &mut |ca| {
                if cx > 0 || ca.iter().any(|&c| c > 0) {
                    out.push((cx, ca.to_vec()));
                }
            });
        }
        out
    }

    fn fill_combinations(
        &self,
        depth: usize,
        current: &mut Vec<usize>,
        emit: &mut dyn FnMut(&[usize]),
    ) {
        if depth == current.len() {
            emit(current);
            return;
        }
        for &c in &self.c_a {
            current[depth] = c;
            self.fill_combinations(depth + 1, current, emit);
        }
    }

    fn activations(&self, base: &ModelConfig) -> Vec<Activation> {
        match base.kind {
            ModelKind::H2gcn { .. } => self.activation.clone(),
            _ => vec![base.activation],
        }
    }

    /// Stage 1: GNN hyperparameters, plus combined numbers at the fixed
    /// `(t, λ)` when `base` uses MSI. Enumeration order is dropout, weight
    /// decay, activation, then combined numbers.
    pub fn stage1(&self, base: &ModelConfig) -> Vec<ModelConfig> {
        let mut grid = Vec::new();
        let combos = self.combined_numbers();
        for &dropout in &self.dropout {
            for &weight_decay in &self.weight_decay {
                for activation in self.activations(base) {
                    let gnn = ModelConfig {
                        dropout,
                        weight_decay,
                        activation,
                        ..base.clone()
                    };
                    if base.msi.is_none() {
                        grid.push(gnn);
                        continue;
                    }
                    for (c_x, c_a) in &combos {
                        grid.push(ModelConfig {
                            msi: Some(MsiConfig {
                                t: self.stage1_t,
                                n: self.n,
                                lambda: self.stage1_lambda,
                                c_x: *c_x,
                                c_a: c_a.clone(),
                            }),
                            ..gnn.clone()
                        });
                    }
                }
            }
        }
        grid
    }

    /// Stage 2: keeps the GNN hyperparameters of `best` and searches `t`, `λ`
    /// and combined numbers. Empty for non-MSI models.
    pub fn stage2(&self, best: &ModelConfig) -> Vec<ModelConfig> {
        if best.msi.is_none() {
            return Vec::new();
        }
        let combos = self.combined_numbers();
        let mut grid = Vec::new();
        for &t in &self.stage2_t {
            for &lambda in &self.stage2_lambda {
                for (c_x, c_a) in &combos {
                    grid.push(ModelConfig {
                        msi: Some(MsiConfig {
                            t,
                            n: self.n,
                            lambda,
                            c_x: *c_x,
                            c_a: c_a.clone(),
                        }),
                        ..best.clone()
                    });
                }
            }
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub config: ModelConfig,
    /// Mean validation accuracy (percent) over splits, failures as 0.
    pub mean_val_accuracy: f64,
    pub mean_test_accuracy: f64,
    pub failed_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub scores: Vec<CandidateScore>,
    /// Index into `scores` of the selected candidate.
    pub best: usize,
}

impl SearchOutcome {
    pub fn best_config(&self) -> &ModelConfig {
        &self.scores[self.best].config
    }
}

/// Evaluates each candidate on every split and picks the highest mean
/// validation accuracy; the earliest candidate wins ties. With `jobs > 1`
/// candidates run concurrently.
pub fn grid_search(
    prepared: &PreparedGraph,
    splits: &[SplitMasks],
    candidates: &[ModelConfig],
    train: &TrainConfig,
    jobs: usize,
) -> Result<SearchOutcome> {
    if candidates.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let results = run_indexed(jobs, candidates.len(), |i| {
        evaluate(prepared, splits, &candidates[i], train, 1)
    });
    let mut scores = Vec::with_capacity(candidates.len());
    for (config, result) in candidates.iter().zip(results) {
        let eval = result?;
        scores.push(CandidateScore {
            config: config.clone(),
            mean_val_accuracy: eval.result.mean_val_accuracy,
            mean_test_accuracy: eval.result.mean_accuracy,
            failed_runs: eval.result.failed_runs,
        });
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.mean_val_accuracy > scores[best].mean_val_accuracy {
            best = i;
        }
    }
    Ok(SearchOutcome { scores, best })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageOutcome {
    pub stage1: SearchOutcome,
    pub stage2: Option<SearchOutcome>,
    pub best: ModelConfig,
}

/// Stage 1 over GNN hyperparameters (and combined numbers at fixed `t`, `λ`),
/// then stage 2 over `t`, `λ` and combined numbers for MSI models.
pub fn two_stage_search(
    prepared: &PreparedGraph,
    splits: &[SplitMasks],
    base: &ModelConfig,
    space: &SearchSpace,
    train: &TrainConfig,
    jobs: usize,
) -> Result<TwoStageOutcome> {
    let stage1 = grid_search(prepared, splits, &space.stage1(base), train, jobs)?;
    let stage1_best = stage1.best_config().clone();
    let stage2_grid = space.stage2(&stage1_best);
    if stage2_grid.is_empty() {
        return Ok(TwoStageOutcome {
            stage1,
            stage2: None,
            best: stage1_best,
        });
    }
    let stage2 = grid_search(prepared, splits, &stage2_grid, train, jobs)?;
    let best = stage2.best_config().clone();
    Ok(TwoStageOutcome {
        stage1,
        stage2: Some(stage2),
        best,
    })
}
