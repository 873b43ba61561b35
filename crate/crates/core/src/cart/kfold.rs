use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Constraints};
use crate::error::{Error, Result};
use crate::features::{Dataset, Sample};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossValidationConfig {
    pub k: usize,
    pub seed: u64,
}

impl Default for CrossValidationConfig {
    fn default() -> Self {
        CrossValidationConfig { k: 5, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KFoldReport {
    pub cu_depth: u8,
    pub k: usize,
    pub fold_sizes: Vec<usize>,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

/// Shuffles `0..n` under `seed` and cuts it into `k` folds whose sizes
/// differ by at most one (the first `n % k` folds take the extra sample).
pub fn fold_assignments(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::domain("k-fold validation needs k >= 2"));
    }
    if n < k {
        return Err(Error::domain(format!("{n} samples cannot fill {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = n / k + usize::from(f < n % k);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// Trains `k` trees on `k - 1` folds each and scores them on the held-out fold.
pub fn kfold_validate(
    dataset: &Dataset,
    cu_depth: u8,
    config: &CrossValidationConfig,
    constraints: &Constraints,
) -> Result<KFoldReport> {
    let samples: Vec<&Sample> = dataset.at_depth(cu_depth).collect();
    let folds = fold_assignments(samples.len(), config.k, config.seed)?;
    let mut fold_of = vec![0usize; samples.len()];
    for (f, members) in folds.iter().enumerate() {
        for &i in members {
            fold_of[i] = f;
        }
    }
    let mut accuracies = Vec::with_capacity(config.k);
    for (f, held_out) in folds.iter().enumerate() {
        let train = samples
            .iter()
            .zip(&fold_of)
            .filter(|(_, &g)| g != f)
            .map(|(s, _)| *s);
        let tree = grow_tree(train, cu_depth, constraints)?;
        let correct = held_out
            .iter()
            .filter(|&&i| {
                let s = samples[i];
                tree.predict(&s.features.to_array()).split == s.label
            })
            .count();
        accuracies.push(correct as f64 / held_out.len() as f64);
    }
    let mean_accuracy = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    Ok(KFoldReport {
        cu_depth,
        k: config.k,
        fold_sizes: folds.iter().map(Vec::len).collect(),
        fold_accuracies: accuracies,
        mean_accuracy,
    })
}
