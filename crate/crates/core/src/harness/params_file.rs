//! Flat TOML parameter files, one per dataset/model pair:
//!
//! ```toml
//! model = "msi-h2gcn-2"
//! weight_decay = 5e-4
//! dropout = 0.5
//! activation = "relu"
//! discount = 1.0
//! t = 10
//! c_x = 1
//! c_a1 = 8
//! c_a2 = 4
//! ```
//!
//! GCNII files also carry `layers`, `alpha` and `beta`. `hidden` defaults to
//! 64, `n` to 1 and `activation` to `relu`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{parse_model_name, Activation, ModelConfig, ModelKind, DEFAULT_HIDDEN};
use crate::msi::MsiConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub model: String,
    pub hidden: Option<usize>,
    pub weight_decay: f64,
    pub dropout: f64,
    pub activation: Option<String>,
    pub layers: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub discount: Option<f64>,
    pub t: Option<usize>,
    pub n: Option<usize>,
    pub c_x: Option<usize>,
    pub c_a1: Option<usize>,
    pub c_a2: Option<usize>,
    pub c_a3: Option<usize>,
}

fn required<T>(value: Option<T>, key: &str, model: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("{model} needs `{key}`")))
}

impl ParamsFile {
    pub fn parse(text: &str) -> Result<ParamsFile> {
        toml::from_str(text).map_err(|e| Error::Config(format!("parameter file: {e}")))
    }

    pub fn load(path: &Path) -> Result<ParamsFile> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat struct serializes")
    }

    /// Resolves defaults and checks that the keys match the model family.
    pub fn to_model_config(&self) -> Result<ModelConfig> {
        let (mut kind, msi) = parse_model_name(&self.model)?;
        let name = self.model.as_str();
        if let ModelKind::Gcnii { .. } = kind {
            kind = ModelKind::Gcnii {
                layers: required(self.layers, "layers", name)?,
                alpha: required(self.alpha, "alpha", name)?,
                beta: required(self.beta, "beta", name)?,
            };
        } else if self.layers.is_some() || self.alpha.is_some() || self.beta.is_some() {
            return Err(Error::Config(format!(
                "{name} takes no layers/alpha/beta keys"
            )));
        }
        let activation = match &self.activation {
            Some(a) => a.parse()?,
            None => Activation::Relu,
        };
        let msi = if msi {
            let mut c_a = vec![required(self.c_a1, "c_a1", name)?];
            if let Some(c) = self.c_a2 {
                c_a.push(c);
                c_a.extend(self.c_a3);
            } else if self.c_a3.is_some() {
                return Err(Error::Config("c_a3 given without c_a2".into()));
            }
            Some(MsiConfig {
                t: required(self.t, "t", name)?,
                n: self.n.unwrap_or(1),
                lambda: required(self.discount, "discount", name)?,
                c_x: required(self.c_x, "c_x", name)?,
                c_a,
            })
        } else {
            let msi_keys = [self.t, self.n, self.c_x, self.c_a1, self.c_a2, self.c_a3];
            if self.discount.is_some() || msi_keys.iter().any(Option::is_some) {
                return Err(Error::Config(format!("{name} takes no MSI keys")));
            }
            None
        };
        let config = ModelConfig {
            kind,
            hidden: self.hidden.unwrap_or(DEFAULT_HIDDEN),
            activation,
            dropout: self.dropout,
            weight_decay: self.weight_decay,
            msi,
        };
        config.validate()?;
        Ok(config)
    }

    /// Fully resolved file for `config`: every default is written out.
    pub fn from_model_config(config: &ModelConfig) -> ParamsFile {
        let mut file = ParamsFile {
            model: config.name(),
            hidden: Some(config.hidden),
            weight_decay: config.weight_decay,
            dropout: config.dropout,
            activation: Some(config.activation.to_string()),
            ..ParamsFile::default()
        };
        if let ModelKind::Gcnii {
            layers,
            alpha,
            beta,
        } = config.kind
        {
            file.layers = Some(layers);
            file.alpha = Some(alpha);
            file.beta = Some(beta);
        }
        if let Some(msi) = &config.msi {
            file.discount = Some(msi.lambda);
            file.t = Some(msi.t);
            file.n = Some(msi.n);
            file.c_x = Some(msi.c_x);
            file.c_a1 = msi.c_a.first().copied();
            file.c_a2 = msi.c_a.get(1).copied();
            file.c_a3 = msi.c_a.get(2).copied();
        }
        file
    }
}
