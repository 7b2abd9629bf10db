//! Stratified train/validation/test splits.
//!
//! Within each class the members are shuffled, then `floor(0.48·n)` go to
//! train, `floor(0.20·n)` to test and the remainder to validation. A class
//! whose train share would round to zero still contributes one training node
//! so that every class is represented in train.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{derive_seed, seeded};

pub const TRAIN_PERCENT: usize = 48;
pub const TEST_PERCENT: usize = 20;

/// Disjoint node-id sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitMasks {
    pub fn new(mut train: Vec<usize>, mut val: Vec<usize>, mut test: Vec<usize>) -> Self {
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        SplitMasks { train, val, test }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-class `(train, test, val)` sizes for a class of `n` members.
pub fn class_split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (n * TRAIN_PERCENT / 100).max(1).min(n);
    let test = (n * TEST_PERCENT / 100).min(n - train);
    (train, test, n - train - test)
}

pub fn make_splits(graph: &Graph, num_splits: usize, seed: u64) -> Result<Vec<SplitMasks>> {
    let members = graph.class_members();
    if let Some(y) = members.iter().position(Vec::is_empty) {
        return Err(Error::Split(format!(
            "class {y} has no members and cannot appear in the training set"
        )));
    }
    Ok((0..num_splits)
        .map(|k| {
            let mut rng = seeded(derive_seed(seed, k as u64));
            let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
            for class in &members {
                let mut shuffled = class.clone();
                shuffled.shuffle(&mut rng);
                let (n_train, n_test, _) = class_split_sizes(shuffled.len());
                train.extend_from_slice(&shuffled[..n_train]);
                test.extend_from_slice(&shuffled[n_train..n_train + n_test]);
                val.extend_from_slice(&shuffled[n_train + n_test..]);
            }
            SplitMasks::new(train, val, test)
        })
        .collect())
}
