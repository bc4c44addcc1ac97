use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Manifest;
use crate::error::{LidError, Result};

pub const DEFAULT_K: usize = 5;

/// Fold id for every manifest entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Training and validation entry indices for `fold`.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let (mut train, mut val) = (Vec::new(), Vec::new());
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold { val.push(i) } else { train.push(i) }
        }
        (train, val)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.assignments {
            s[f] += 1;
        }
        s
    }
}

/// Per-language shuffle under `seed`, then round-robin assignment.
pub fn make_folds(manifest: &Manifest, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(LidError::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    let counts = manifest.class_counts();
    if let Some((lang, &n)) = counts.iter().enumerate().find(|(_, &n)| n < k) {
        return Err(LidError::InvalidArgument(format!(
            "language {:?} has {n} entries, fewer than k = {k}",
            manifest.languages[lang]
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; manifest.entries.len()];
    for label in 0..manifest.num_classes() {
        let mut idx: Vec<usize> = (0..manifest.entries.len()).filter(|&i| manifest.entries[i].label == label).collect();
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            assignments[i] = j % k;
        }
    }
    Ok(FoldPlan { k, seed, assignments })
}
