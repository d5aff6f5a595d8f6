use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CodeMatrix, DelegateMatrix, HyperParams, InteractionSet};
use crate::{DphError, Result};

pub const DEFAULT_AUC_SAMPLES: usize = 100_000;

/// Predicted preference `1/2 + b.d / (2r)` of two `±1` codes.
pub fn preference(b: &[i8], d: &[i8]) -> Result<f64> {
    if b.len() != d.len() || b.is_empty() {
        return Err(DphError::Dimension(format!(
            "code lengths {} and {} differ or are empty",
            b.len(),
            d.len()
        )));
    }
    let dot: i64 = b.iter().zip(d).map(|(&x, &y)| i64::from(x) * i64::from(y)).sum();
    Ok(0.5 + dot as f64 / (2.0 * b.len() as f64))
}

/// Same quantity written as `1 - hamming / r`.
pub fn preference_from_hamming(r: usize, hamming: u32) -> f64 {
    1.0 - f64::from(hamming) / r as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AucMode {
    /// Enumerate every `(i, j)` pair of every user. Small instances only.
    Exact,
    /// Pick an eligible user uniformly, then a positive and a negative
    /// uniformly.
    Sampled { pairs: usize, seed: u64 },
}

/// Mean per-user AUC. Tied preferences count as misordered.
pub fn auc(
    interactions: &InteractionSet,
    users: &CodeMatrix,
    items: &CodeMatrix,
    mode: AucMode,
) -> Result<f64> {
    auc_with_tie_credit(interactions, users, items, mode, 0.0)
}

/// AUC where a tied pair scores `tie_credit` instead of zero.
pub fn auc_with_tie_credit(
    interactions: &InteractionSet,
    users: &CodeMatrix,
    items: &CodeMatrix,
    mode: AucMode,
    tie_credit: f64,
) -> Result<f64> {
    check_code_dims(interactions, users, items)?;
    let eligible: Vec<usize> = interactions.eligible_users().collect();
    if eligible.is_empty() {
        return Err(DphError::UndefinedMetric(
            "no user has both positive and negative items".into(),
        ));
    }
    let score = |u: usize, i: usize, j: usize| -> f64 {
        let hi = users.hamming_to(u, items, i);
        let hj = users.hamming_to(u, items, j);
        match hi.cmp(&hj) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => tie_credit,
            std::cmp::Ordering::Greater => 0.0,
        }
    };
    match mode {
        AucMode::Exact => {
            let mut total = 0.0;
            for &u in &eligible {
                let pos = interactions.user_positives(u);
                let mut hits = 0.0;
                for &i in pos {
                    for j in (0..interactions.n_items()).filter(|j| pos.binary_search(j).is_err()) {
                        hits += score(u, i, j);
                    }
                }
                total += hits / (pos.len() * interactions.n_negatives(u)) as f64;
            }
            Ok(total / eligible.len() as f64)
        }
        AucMode::Sampled { pairs, seed } => {
            if pairs == 0 {
                return Err(DphError::InvalidArgument("AUC sample size must be >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut hits = 0.0;
            for _ in 0..pairs {
                let u = eligible[rng.random_range(0..eligible.len())];
                let pos = interactions.user_positives(u);
                let i = pos[rng.random_range(0..pos.len())];
                let j = nth_non_member(pos, rng.random_range(0..interactions.n_negatives(u)));
                hits += score(u, i, j);
            }
            Ok(hits / pairs as f64)
        }
    }
}

/// The `t`-th (0-based) integer not present in the sorted slice `members`.
pub(crate) fn nth_non_member(members: &[usize], t: usize) -> usize {
    let mut j = t;
    for &p in members {
        if p <= j {
            j += 1;
        } else {
            break;
        }
    }
    j
}

fn check_code_dims(
    interactions: &InteractionSet,
    users: &CodeMatrix,
    items: &CodeMatrix,
) -> Result<()> {
    if users.count() != interactions.n_users() || items.count() != interactions.n_items() {
        return Err(DphError::Dimension(format!(
            "codes cover {} users / {} items, interactions have {} / {}",
            users.count(),
            items.count(),
            interactions.n_users(),
            interactions.n_items()
        )));
    }
    if users.r() != items.r() {
        return Err(DphError::Dimension(format!(
            "user codes have r={}, item codes r={}",
            users.r(),
            items.r()
        )));
    }
    Ok(())
}

/// `sum_u z_u sum_{i in I+, j in I-} (2r - b_u.(d_i - d_j))^2` on dense
/// `r x n` / `r x m` sign matrices.
///
/// Expanded per user into sums over the positives plus the global item sum
/// `S = D 1` and Gram matrix `G = D D^T`, so the cost is
/// `O(r^2 m + r * nnz + r^2 n)` rather than cubic.
pub fn pairwise_loss(interactions: &InteractionSet, b: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let r = b.nrows() as f64;
    let item_sum: DVector<f64> = d.column_sum();
    let gram = d * d.transpose();
    let mut total = 0.0;
    for u in interactions.eligible_users() {
        let bu = b.column(u);
        let pos = interactions.user_positives(u);
        let p = pos.len() as f64;
        let q = interactions.n_negatives(u) as f64;
        let (mut sum_pos, mut sq_pos) = (0.0, 0.0);
        for &i in pos {
            let s = bu.dot(&d.column(i));
            sum_pos += s;
            sq_pos += s * s;
        }
        let sum_neg = bu.dot(&item_sum) - sum_pos;
        let sq_neg = (bu.transpose() * &gram * bu)[(0, 0)] - sq_pos;
        let inner = 4.0 * r * r * p * q - 4.0 * r * (q * sum_pos - p * sum_neg) + q * sq_pos
            - 2.0 * sum_pos * sum_neg
            + p * sq_neg;
        total += interactions.z(u) * inner;
    }
    total
}

/// Full objective: pairwise term + `lambda ||D - F||^2 - 2 alpha tr(B^T X) - 2 beta tr(D^T Y)`.
pub fn total_loss(
    interactions: &InteractionSet,
    users: &CodeMatrix,
    items: &CodeMatrix,
    user_delegate: &DelegateMatrix,
    item_delegate: &DelegateMatrix,
    embeddings: &DMatrix<f64>,
    hp: &HyperParams,
) -> Result<f64> {
    check_code_dims(interactions, users, items)?;
    let r = users.r();
    let shape_ok = user_delegate.values().shape() == (r, users.count())
        && item_delegate.values().shape() == (r, items.count())
        && embeddings.shape() == (r, items.count());
    if !shape_ok {
        return Err(DphError::Dimension(
            "delegates and embeddings must be r x count".into(),
        ));
    }
    let b = users.to_dense();
    let d = items.to_dense();
    Ok(dense_objective(
        interactions,
        &b,
        &d,
        user_delegate.values(),
        item_delegate.values(),
        embeddings,
        hp,
    ))
}

pub(crate) fn dense_objective(
    interactions: &InteractionSet,
    b: &DMatrix<f64>,
    d: &DMatrix<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    f: &DMatrix<f64>,
    hp: &HyperParams,
) -> f64 {
    pairwise_loss(interactions, b, d) + hp.lambda * (d - f).norm_squared()
        - 2.0 * hp.alpha * b.dot(x)
        - 2.0 * hp.beta * d.dot(y)
}
