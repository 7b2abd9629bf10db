use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::error::Result;
use crate::models::ModelConfig;
use crate::rng::derive_seed;
use crate::split::SplitMasks;

use super::train::{train_once, PreparedGraph, TrainConfig};

/// Runs `f(0..n)` on a dedicated pool of `jobs` threads, or serially when
/// `jobs <= 1`. Results keep index order either way.
pub fn run_indexed<T, F>(jobs: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if jobs <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

/// Seed of split `k`'s training run.
pub fn split_seed(base: u64, split: usize) -> u64 {
    derive_seed(base, 1_000 + split as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub split: usize,
    pub seed: u64,
    /// Test accuracy in percent; 0 for a failed run.
    pub test_accuracy: f64,
    /// Validation accuracy in percent; 0 for a failed run.
    pub val_accuracy: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub input_width: usize,
    /// Set when the run failed; the accuracies above are then 0.
    pub error: Option<String>,
}

impl SplitResult {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub splits: Vec<SplitResult>,
    /// Mean test accuracy in percent over all splits, failures counted as 0.
    pub mean_accuracy: f64,
    /// Population standard deviation of the per-split test accuracies.
    pub std_accuracy: f64,
    pub mean_val_accuracy: f64,
    pub failed_runs: usize,
}

/// An experiment plus the trained parameters and timings of every split.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub result: ExperimentResult,
    /// Best-validation parameters per split; `None` for failed runs.
    pub params: Vec<Option<ParamStore>>,
    pub wall_clock_secs: Vec<f64>,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains `config` once per split. A run that fails (divergence, degenerate
/// selection) is recorded with zero accuracy instead of aborting the others.
/// Invalid configurations are rejected before any run starts.
pub fn evaluate(
    prepared: &PreparedGraph,
    splits: &[SplitMasks],
    config: &ModelConfig,
    train: &TrainConfig,
    jobs: usize,
) -> Result<Evaluation> {
    config.validate()?;
    train.validate()?;
    let runs = run_indexed(jobs, splits.len(), |k| {
        let start = Instant::now();
        let run_train = TrainConfig {
            seed: split_seed(train.seed, k),
            ..*train
        };
        let outcome = train_once(prepared, &splits[k], config, &run_train);
        (run_train.seed, outcome, start.elapsed().as_secs_f64())
    });

    let mut split_results = Vec::with_capacity(runs.len());
    let mut params = Vec::with_capacity(runs.len());
    let mut wall_clock_secs = Vec::with_capacity(runs.len());
    for (k, (seed, outcome, secs)) in runs.into_iter().enumerate() {
        wall_clock_secs.push(secs);
        match outcome {
            Ok(out) => {
                split_results.push(SplitResult {
                    split: k,
                    seed,
                    test_accuracy: 100.0 * out.test_accuracy,
                    val_accuracy: 100.0 * out.val_accuracy,
                    best_epoch: out.best_epoch,
                    epochs_run: out.epochs_run,
                    input_width: out.input_width,
                    error: None,
                });
                params.push(Some(out.params));
            }
            Err(e) => {
                split_results.push(SplitResult {
                    split: k,
                    seed,
                    test_accuracy: 0.0,
                    val_accuracy: 0.0,
                    best_epoch: 0,
                    epochs_run: 0,
                    input_width: 0,
                    error: Some(e.to_string()),
                });
                params.push(None);
            }
        }
    }

    let test: Vec<f64> = split_results.iter().map(|r| r.test_accuracy).collect();
    let val: Vec<f64> = split_results.iter().map(|r| r.val_accuracy).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&test);
    let (mean_val_accuracy, _) = mean_std(&val);
    let failed_runs = split_results.iter().filter(|r| r.failed()).count();
    Ok(Evaluation {
        result: ExperimentResult {
            model: config.clone(),
            train: *train,
            splits: split_results,
            mean_accuracy,
            std_accuracy,
            mean_val_accuracy,
            failed_runs,
        },
        params,
        wall_clock_secs,
    })
}
