use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ContentMatrix, ImplicitFeedback};
use crate::model::InteractionSet;
use crate::{DphError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// Fraction of non-cold positives kept for training.
    pub sparsity_level: f64,
    /// Items with fewer positives than this are cold.
    pub cold_threshold: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            sparsity_level: 0.1,
            cold_threshold: 5,
            repetitions: 5,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sparsity_level > 0.0 && self.sparsity_level <= 1.0) {
            return Err(DphError::InvalidArgument(format!(
                "sparsity level must be in (0, 1], got {}",
                self.sparsity_level
            )));
        }
        if self.cold_threshold == 0 {
            return Err(DphError::InvalidArgument("cold threshold must be >= 1".into()));
        }
        if self.repetitions == 0 {
            return Err(DphError::InvalidArgument("repetitions must be >= 1".into()));
        }
        Ok(())
    }
}

/// One train / sparse-test / cold-test partition. Serializes to the split
/// manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub spec: SplitSpec,
    pub rep_index: usize,
    /// User keys by id.
    pub users: Vec<String>,
    /// Item keys by id.
    pub items: Vec<String>,
    pub train: InteractionSet,
    pub test_sparse: Vec<(usize, usize)>,
    pub test_cold: Vec<(usize, usize)>,
    pub cold_items: Vec<usize>,
    /// Test pairs removed because their user has no training positive.
    pub dropped_sparse: usize,
    pub dropped_cold: usize,
}

impl DatasetSplit {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn is_cold(&self, item: usize) -> bool {
        self.cold_items.binary_search(&item).is_ok()
    }

    /// Item ids that are not cold, ascending.
    pub fn warm_items(&self) -> Vec<usize> {
        (0..self.n_items()).filter(|&i| !self.is_cold(i)).collect()
    }
}

/// Partitions binarized feedback into train, sparse test and cold test.
///
/// Items with fewer than `cold_threshold` positives (and non-empty content)
/// are cold: all of their pairs go to the cold test set. Of the remaining
/// pairs exactly `floor(sparsity_level * N)` are drawn for training with a
/// generator seeded by `seed + rep_index`; the rest form the sparse test set.
/// Test pairs whose user ends up with no training positive are dropped.
pub fn split(
    feedback: &ImplicitFeedback,
    content: &ContentMatrix,
    spec: &SplitSpec,
    rep_index: usize,
) -> Result<DatasetSplit> {
    spec.validate()?;
    if rep_index >= spec.repetitions {
        return Err(DphError::InvalidArgument(format!(
            "repetition {rep_index} out of range for {} repetitions",
            spec.repetitions
        )));
    }
    let n_items = feedback.n_items();
    if content.n_items() != n_items {
        return Err(DphError::Dimension(format!(
            "content has {} rows, feedback has {n_items} items",
            content.n_items()
        )));
    }
    let mut item_degree = vec![0usize; n_items];
    for &(_, i) in &feedback.pairs {
        item_degree[i] += 1;
    }
    let cold_items: Vec<usize> = (0..n_items)
        .filter(|&i| item_degree[i] < spec.cold_threshold && !content.empty[i])
        .collect();
    let mut is_cold = vec![false; n_items];
    for &i in &cold_items {
        is_cold[i] = true;
    }

    let (cold_pairs, warm_pairs): (Vec<_>, Vec<_>) =
        feedback.pairs.iter().copied().partition(|&(_, i)| is_cold[i]);

    let n_train = ((spec.sparsity_level * warm_pairs.len() as f64) + 1e-9).floor() as usize;
    let n_train = n_train.min(warm_pairs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(rep_index as u64));
    let mut chosen = rand::seq::index::sample(&mut rng, warm_pairs.len(), n_train).into_vec();
    chosen.sort_unstable();
    let mut in_train = vec![false; warm_pairs.len()];
    for &c in &chosen {
        in_train[c] = true;
    }
    let train_pairs: Vec<(usize, usize)> = chosen.iter().map(|&c| warm_pairs[c]).collect();
    if train_pairs.is_empty() {
        return Err(DphError::Split(format!(
            "no training pairs: {} non-cold positives at sparsity level {}",
            warm_pairs.len(),
            spec.sparsity_level
        )));
    }
    let train = InteractionSet::from_pairs(feedback.n_users(), n_items, train_pairs)?;

    let has_train = |u: usize| !train.user_positives(u).is_empty();
    let keep = |pairs: Vec<(usize, usize)>| -> (Vec<(usize, usize)>, usize) {
        let before = pairs.len();
        let kept: Vec<_> = pairs.into_iter().filter(|&(u, _)| has_train(u)).collect();
        let dropped = before - kept.len();
        (kept, dropped)
    };
    let sparse_pairs = warm_pairs
        .iter()
        .zip(&in_train)
        .filter(|(_, &t)| !t)
        .map(|(&p, _)| p)
        .collect();
    let (test_sparse, dropped_sparse) = keep(sparse_pairs);
    let (test_cold, dropped_cold) = keep(cold_pairs);
    if dropped_sparse + dropped_cold > 0 {
        log::info!(
            "split: dropped {dropped_sparse} sparse and {dropped_cold} cold test pairs of users without training positives"
        );
    }

    Ok(DatasetSplit {
        spec: spec.clone(),
        rep_index,
        users: feedback.users.clone(),
        items: feedback.items.clone(),
        train,
        test_sparse,
        test_cold,
        cold_items,
        dropped_sparse,
        dropped_cold,
    })
}
