use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, AdamConfig, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hop::{compute_hop_adjacency, HopAdjacency};
use crate::models::{Model, ModelConfig, Propagation};
use crate::msi::{build_msi_layer_sparse, select_structures};
use crate::rng::{derive_seed, seeded};
use crate::sparse::SparseMatrix;
use crate::split::SplitMasks;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Stop after this many consecutive epochs without a strictly lower
    /// validation loss.
    pub patience: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            patience: 200,
            lr: 0.01,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.patience >= self.epochs {
            return Err(Error::Config(format!(
                "need 0 < patience < epochs, got patience {} and epochs {}",
                self.patience, self.epochs
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {}", self.lr)));
        }
        Ok(())
    }
}

/// A graph together with the hop matrices and propagation operators every
/// run on it shares.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub graph: Graph,
    pub features: Arc<SparseMatrix>,
    pub hops: Vec<HopAdjacency>,
    pub propagation: Propagation,
}

impl PreparedGraph {
    /// Precomputes hop matrices `A_1..A_max_hop` (at least `A_1`).
    pub fn new(graph: Graph, max_hop: usize) -> Self {
        let hops = compute_hop_adjacency(&graph, max_hop.max(1));
        let propagation = Propagation::new(&graph, &hops);
        let features = Arc::new(SparseMatrix::from_dense(graph.features().view()));
        PreparedGraph {
            graph,
            features,
            hops,
            propagation,
        }
    }

    /// Prepares enough hops for every config in `configs`.
    pub fn for_configs<'a>(
        graph: Graph,
        configs: impl IntoIterator<Item = &'a ModelConfig>,
    ) -> Self {
        let max_hop = configs.into_iter().map(required_hops).max().unwrap_or(1);
        PreparedGraph::new(graph, max_hop)
    }

    pub fn max_hop(&self) -> usize {
        self.hops.len()
    }

    /// The 0-th layer input matrix for `config` on `split`: raw features, or
    /// the MSI layer built from IGR selections over the split's training nodes.
    pub fn model_input(
        &self,
        split: &SplitMasks,
        config: &ModelConfig,
    ) -> Result<Arc<SparseMatrix>> {
        let Some(msi) = &config.msi else {
            return Ok(Arc::clone(&self.features));
        };
        let selected = select_structures(&self.graph, &self.hops, &split.train, msi)?;
        let features = (msi.c_x > 0).then(|| self.features.as_ref());
        Ok(Arc::new(build_msi_layer_sparse(features, &selected, msi)?))
    }
}

/// Highest hop a config touches, through propagation or the MSI layer.
pub fn required_hops(config: &ModelConfig) -> usize {
    let msi = config.msi.as_ref().map_or(0, |m| m.max_hop());
    config.kind.propagation_hops().max(msi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub params: ParamStore,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub best_val_loss: f64,
    /// Accuracies (fractions in `[0, 1]`) of the returned parameters.
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub input_width: usize,
    pub history: Vec<EpochRecord>,
}

/// Fraction of `rows` whose arg-max logit equals the label.
pub fn accuracy(logits: &Array2<f64>, labels: &[usize], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let correct = rows
        .iter()
        .filter(|&&r| {
            let row = logits.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best == labels[r]
        })
        .count();
    correct as f64 / rows.len() as f64
}

/// Logits of `model` in evaluation mode.
pub fn predict(
    model: &Model,
    propagation: &Propagation,
    input: &Arc<SparseMatrix>,
) -> Result<Array2<f64>> {
    let mut tape = Tape::new();
    // eval mode draws no random numbers
    let mut rng = seeded(0);
    let fwd = model.forward(&mut tape, propagation, input, false, &mut rng)?;
    Ok(tape.value(fwd.logits).clone())
}

/// Builds the split's model input and trains on it.
pub fn train_once(
    prepared: &PreparedGraph,
    split: &SplitMasks,
    config: &ModelConfig,
    train: &TrainConfig,
) -> Result<TrainOutcome> {
    let input = prepared.model_input(split, config)?;
    train_on_input(prepared, &input, split, config, train)
}

/// Full-batch training with Adam and validation-loss early stopping.
pub fn train_on_input(
    prepared: &PreparedGraph,
    input: &Arc<SparseMatrix>,
    split: &SplitMasks,
    config: &ModelConfig,
    train: &TrainConfig,
) -> Result<TrainOutcome> {
    train.validate()?;
    let graph = &prepared.graph;
    let labels = graph.labels();
    let mut init_rng = seeded(derive_seed(train.seed, 0));
    let mut dropout_rng = seeded(derive_seed(train.seed, 1));
    let mut model = Model::new(
        config.clone(),
        input.cols(),
        graph.num_classes(),
        &mut init_rng,
    )?;
    let mut adam = Adam::new(
        AdamConfig {
            lr: train.lr,
            weight_decay: config.weight_decay,
            ..AdamConfig::default()
        },
        &model.params,
    );
    let diverged = |epoch: usize, e: Error| match e {
        Error::NonFinite(op) => Error::Diverged {
            epoch,
            reason: format!("non-finite output from {op}"),
        },
        other => other,
    };

    let mut best_params = model.params.clone();
    let mut best_val_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut history = Vec::new();
    let mut epochs_run = 0;

    for epoch in 1..=train.epochs {
        epochs_run = epoch;
        let mut tape = Tape::new();
        let fwd = model
            .forward(
                &mut tape,
                &prepared.propagation,
                input,
                true,
                &mut dropout_rng,
            )
            .map_err(|e| diverged(epoch, e))?;
        let loss = tape
            .softmax_cross_entropy(fwd.logits, labels, &split.train)
            .map_err(|e| diverged(epoch, e))?;
        let train_loss = tape.value(loss)[[0, 0]];
        let grads = tape.backward(loss)?;
        let grads: Vec<_> = fwd
            .params
            .iter()
            .zip(model.params.iter())
            .map(|(&v, p)| grads.get_or_zeros(v, p.value.dim()))
            .collect();
        adam.step(&mut model.params, &grads)?;

        let mut eval = Tape::new();
        let fwd = model
            .forward(
                &mut eval,
                &prepared.propagation,
                input,
                false,
                &mut dropout_rng,
            )
            .map_err(|e| diverged(epoch, e))?;
        let val_loss_var = eval
            .softmax_cross_entropy(fwd.logits, labels, &split.val)
            .map_err(|e| diverged(epoch, e))?;
        let val_loss = eval.value(val_loss_var)[[0, 0]];
        let val_accuracy = accuracy(eval.value(fwd.logits), labels, &split.val);
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });

        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            best_epoch = epoch;
            best_params = model.params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= train.patience {
                break;
            }
        }
    }

    model.params = best_params;
    let logits = predict(&model, &prepared.propagation, input)?;
    Ok(TrainOutcome {
        train_accuracy: accuracy(&logits, labels, &split.train),
        val_accuracy: accuracy(&logits, labels, &split.val),
        test_accuracy: accuracy(&logits, labels, &split.test),
        params: model.params,
        best_epoch,
        epochs_run,
        best_val_loss,
        input_width: input.cols(),
        history,
    })
}
