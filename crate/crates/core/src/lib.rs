//! Graph neural networks with multi-hop structural input layers.
//!
//! The pipeline: load a [`graph::Graph`], compute exact-distance hop
//! matrices ([`hop`]), rank their columns by information gain ratio
//! ([`igr`]), assemble the duplicated and discounted input layer ([`msi`]),
//! and train GCN, H2GCN or GCNII ([`models`]) with the reverse-mode engine
//! in [`autodiff`] through the [`harness`].

pub mod autodiff;
pub mod checkpoint;
pub mod error;
pub mod graph;
pub mod harness;
pub mod hop;
pub mod igr;
pub mod models;
pub mod msi;
pub mod rng;
pub mod sparse;
pub mod split;

pub use error::{Error, Result};
