//! GCN, H2GCN-K and GCNII, each usable with the raw feature matrix or an
//! MSI layer as its 0-th layer input.
//!
//! Inputs are sparse constants; the first learned transform is a
//! sparse-dense product. Dropout is applied to the input of every learned
//! linear transform.

mod normalize;

pub use normalize::{hop_normalized, self_loop_normalized};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{glorot_uniform, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hop::HopAdjacency;
use crate::msi::MsiConfig;
use crate::sparse::SparseMatrix;

pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::None => Ok(x),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "none" | "identity" | "linear" => Ok(Activation::None),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelKind {
    /// Two-layer GCN.
    Gcn,
    /// H2GCN with `rounds` parameter-free aggregation rounds.
    H2gcn { rounds: usize },
    /// GCNII with `layers` propagation layers.
    Gcnii {
        layers: usize,
        alpha: f64,
        beta: f64,
    },
}

impl ModelKind {
    pub fn family(&self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::H2gcn { .. } => "h2gcn",
            ModelKind::Gcnii { .. } => "gcnii",
        }
    }

    /// Highest exact-distance hop the propagation needs.
    pub fn propagation_hops(&self) -> usize {
        match self {
            ModelKind::H2gcn { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden: usize,
    /// 0-th layer activation; only H2GCN makes it selectable.
    pub activation: Activation,
    pub dropout: f64,
    pub weight_decay: f64,
    pub msi: Option<MsiConfig>,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            hidden: DEFAULT_HIDDEN,
            activation: Activation::Relu,
            dropout: 0.5,
            weight_decay: 5e-4,
            msi: None,
        }
    }

    /// Display name such as `msi-h2gcn-2`.
    pub fn name(&self) -> String {
        let base = match self.kind {
            ModelKind::H2gcn { rounds } => format!("h2gcn-{rounds}"),
            other => other.family().to_string(),
        };
        if self.msi.is_some() {
            format!("msi-{base}")
        } else {
            base
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("hidden dimension must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight decay must be non-negative".into()));
        }
        match self.kind {
            ModelKind::Gcn => {}
            ModelKind::H2gcn { rounds } => {
                if rounds == 0 {
                    return Err(Error::Config("H2GCN needs at least one round".into()));
                }
            }
            ModelKind::Gcnii {
                layers,
                alpha,
                beta,
            } => {
                if layers == 0 {
                    return Err(Error::Config("GCNII needs at least one layer".into()));
                }
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::Config(format!("GCNII alpha {alpha} outside (0, 1]")));
                }
                if beta < 0.0 {
                    return Err(Error::Config(format!("GCNII beta {beta} is negative")));
                }
            }
        }
        if let Some(msi) = &self.msi {
            msi.validate()?;
        }
        Ok(())
    }
}

/// Normalized propagation matrices shared by all runs on one graph.
#[derive(Debug, Clone)]
pub struct Propagation {
    /// `Â`, self-loop normalized adjacency.
    pub self_loop: Arc<SparseMatrix>,
    /// `Ā_1, Ā_2, ...` hop-normalized exact-distance adjacencies.
    pub hops: Vec<Arc<SparseMatrix>>,
}

impl Propagation {
    pub fn new(graph: &Graph, hops: &[HopAdjacency]) -> Self {
        Propagation {
            self_loop: Arc::new(self_loop_normalized(graph)),
            hops: hops.iter().map(|h| Arc::new(hop_normalized(h))).collect(),
        }
    }
}

/// A model's trainable state plus the shapes it was built for.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub input_dim: usize,
    pub num_classes: usize,
}

/// Handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Var,
    /// One handle per entry of [`Model::params`], in order.
    pub params: Vec<Var>,
}

impl Model {
    /// Initializes weights with Glorot-uniform draws from `rng`; biases start
    /// at zero.
    pub fn new<R: Rng + ?Sized>(
        config: ModelConfig,
        input_dim: usize,
        num_classes: usize,
        rng: &mut R,
    ) -> Result<Model> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("zero-width model input".into()));
        }
        let h = config.hidden;
        let mut params = ParamStore::new();
        match config.kind {
            ModelKind::Gcn => {
                params.push("w1", glorot_uniform(input_dim, h, rng), true);
                params.push("w2", glorot_uniform(h, num_classes, rng), true);
            }
            ModelKind::H2gcn { rounds } => {
                params.push("w_embed", glorot_uniform(input_dim, h, rng), true);
                let width = h * ((1usize << (rounds + 1)) - 1);
                params.push("w_classify", glorot_uniform(width, num_classes, rng), true);
            }
            ModelKind::Gcnii { layers, .. } => {
                params.push("w0", glorot_uniform(input_dim, h, rng), true);
                params.push("b0", ndarray::Array2::zeros((1, h)), false);
                for k in 1..=layers {
                    params.push(format!("w_layer{k}"), glorot_uniform(h, h, rng), true);
                }
                params.push("w_out", glorot_uniform(h, num_classes, rng), true);
                params.push("b_out", ndarray::Array2::zeros((1, num_classes)), false);
            }
        }
        Ok(Model {
            config,
            params,
            input_dim,
            num_classes,
        })
    }

    /// Width of the concatenated representation H2GCN feeds its classifier.
    pub fn h2gcn_concat_width(hidden: usize, rounds: usize) -> usize {
        hidden * ((1usize << (rounds + 1)) - 1)
    }

    /// Records every parameter on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| tape.param(p.value.clone()))
            .collect()
    }

    fn check_input(&self, input: &SparseMatrix) -> Result<()> {
        if input.cols() != self.input_dim {
            return Err(Error::Shape {
                op: "model input",
                detail: format!(
                    "input has {} columns, model expects {}",
                    input.cols(),
                    self.input_dim
                ),
            });
        }
        Ok(())
    }

    /// Dropout on a sparse constant input.
    fn drop_input<R: Rng + ?Sized>(
        &self,
        input: &Arc<SparseMatrix>,
        training: bool,
        rng: &mut R,
    ) -> Arc<SparseMatrix> {
        if training && self.config.dropout > 0.0 {
            Arc::new(input.dropout(self.config.dropout, rng))
        } else {
            Arc::clone(input)
        }
    }

    /// The 0-th layer: the input itself for GCN, `σ(S·W_e)` for H2GCN and
    /// `σ(S·W_0 + b)` for GCNII. `S` is the raw features or the MSI layer.
    pub fn zeroth_layer<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        input: &Arc<SparseMatrix>,
        training: bool,
        rng: &mut R,
    ) -> Result<ZerothLayer> {
        self.check_input(input)?;
        match self.config.kind {
            ModelKind::Gcn => Ok(ZerothLayer::Sparse(Arc::clone(input))),
            ModelKind::H2gcn { .. } => {
                let x = self.drop_input(input, training, rng);
                let z = tape.spmm(&x, vars[0])?;
                Ok(ZerothLayer::Dense(self.config.activation.apply(tape, z)?))
            }
            ModelKind::Gcnii { .. } => {
                let x = self.drop_input(input, training, rng);
                let z = tape.spmm(&x, vars[0])?;
                let z = tape.add_row(z, vars[1])?;
                Ok(ZerothLayer::Dense(tape.relu(z)?))
            }
        }
    }

    /// Builds the forward graph and returns the logits handle.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        prop: &Propagation,
        input: &Arc<SparseMatrix>,
        training: bool,
        rng: &mut R,
    ) -> Result<Forward> {
        let vars = self.bind(tape);
        let h0 = self.zeroth_layer(tape, &vars, input, training, rng)?;
        let logits = match (self.config.kind, h0) {
            (ModelKind::Gcn, ZerothLayer::Sparse(x)) => {
                self.gcn(tape, prop, &vars, &x, training, rng)?
            }
            (ModelKind::H2gcn { rounds }, ZerothLayer::Dense(h0)) => {
                self.h2gcn(tape, prop, &vars, h0, rounds, training, rng)?
            }
            (
                ModelKind::Gcnii {
                    layers,
                    alpha,
                    beta,
                },
                ZerothLayer::Dense(h0),
            ) => self.gcnii(tape, prop, &vars, h0, layers, alpha, beta, training, rng)?,
            _ => unreachable!("zeroth layer variant follows the model kind"),
        };
        Ok(Forward {
            logits,
            params: vars,
        })
    }

    fn gcn<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        prop: &Propagation,
        vars: &[Var],
        x: &Arc<SparseMatrix>,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let x = self.drop_input(x, training, rng);
        let xw = tape.spmm(&x, vars[0])?;
        let h1 = tape.spmm(&prop.self_loop, xw)?;
        let h1 = tape.relu(h1)?;
        let h1 = tape.dropout(h1, self.config.dropout, training, rng)?;
        let hw = tape.matmul(h1, vars[1])?;
        tape.spmm(&prop.self_loop, hw)
    }

    #[allow(clippy::too_many_arguments)]
    fn h2gcn<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        prop: &Propagation,
        vars: &[Var],
        h0: Var,
        rounds: usize,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if prop.hops.len() < 2 {
            return Err(Error::Config(
                "H2GCN needs hop-1 and hop-2 normalized adjacency".into(),
            ));
        }
        let mut reps = vec![h0];
        let mut prev = h0;
        for _ in 0..rounds {
            let a1 = tape.spmm(&prop.hops[0], prev)?;
            let a2 = tape.spmm(&prop.hops[1], prev)?;
            prev = tape.concat_cols(&[a1, a2])?;
            reps.push(prev);
        }
        let all = tape.concat_cols(&reps)?;
        let all = tape.dropout(all, self.config.dropout, training, rng)?;
        tape.matmul(all, vars[1])
    }

    #[allow(clippy::too_many_arguments)]
    fn gcnii<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        prop: &Propagation,
        vars: &[Var],
        h0: Var,
        layers: usize,
        alpha: f64,
        beta: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let initial = tape.scale(h0, alpha)?;
        let mut h = h0;
        for k in 1..=layers {
            let hd = tape.dropout(h, self.config.dropout, training, rng)?;
            let agg = tape.spmm(&prop.self_loop, hd)?;
            let agg = tape.scale(agg, 1.0 - alpha)?;
            let mixed = tape.add(agg, initial)?;
            let kept = tape.scale(mixed, 1.0 - beta)?;
            let transformed = tape.matmul(mixed, vars[1 + k])?;
            let transformed = tape.scale(transformed, beta)?;
            let out = tape.add(kept, transformed)?;
            h = tape.relu(out)?;
        }
        let h = tape.dropout(h, self.config.dropout, training, rng)?;
        let out = tape.matmul(h, vars[layers + 2])?;
        tape.add_row(out, vars[layers + 3])
    }
}

/// Output of [`Model::zeroth_layer`]: GCN consumes its input directly, the
/// other models start from a dense hidden representation.
#[derive(Debug, Clone)]
pub enum ZerothLayer {
    Sparse(Arc<SparseMatrix>),
    Dense(Var),
}

/// Parses names like `gcn`, `msi-gcn`, `h2gcn-2`, `msi-h2gcn-1`, `gcnii`,
/// `msi-gcnii`. Returns the family/rounds and whether MSI is requested.
/// GCNII layer settings come from elsewhere; the defaults here are placeholders
/// the caller must overwrite.
pub fn parse_model_name(name: &str) -> Result<(ModelKind, bool)> {
    let lower = name.to_ascii_lowercase();
    let (msi, rest) = match lower.strip_prefix("msi-") {
        Some(rest) => (true, rest),
        None => (false, lower.as_str()),
    };
    let kind = match rest {
        "gcn" => ModelKind::Gcn,
        "gcnii" => ModelKind::Gcnii {
            layers: 0,
            alpha: 0.0,
            beta: 0.0,
        },
        other => match other.strip_prefix("h2gcn-") {
            Some(k) => ModelKind::H2gcn {
                rounds: k
                    .parse()
                    .map_err(|_| Error::Config(format!("bad H2GCN round count in {name:?}")))?,
            },
            None => return Err(Error::Config(format!("unknown model {name:?}"))),
        },
    };
    Ok((kind, msi))
}
