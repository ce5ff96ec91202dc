use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_FOLDS: usize = 10;

/// Stratified k-fold partition of sample indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    /// `(training rows, held-out rows)` of fold `f`, both ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.fold_of.len()).partition(|&i| self.fold_of[i] != f)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Shuffle each class and deal it round-robin over the folds. Negatives
/// start where positives stopped, so fold sizes also differ by at most one.
pub fn stratified_kfold(labels: &[u8], k: usize, seed_: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = seed::rng(seed_);
    let mut fold_of = vec![0; labels.len()];
    let mut offset = 0;
    for class in [1u8, 0] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::Data(format!(
                "class {class} has {} samples, fewer than {k} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (j, &i) in idx.iter().enumerate() {
            fold_of[i] = (offset + j) % k;
        }
        offset = (offset + idx.len()) % k;
    }
    Ok(FoldAssignment {
        k,
        fold_of,
        seed: seed_,
    })
}
