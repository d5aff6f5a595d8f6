use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use ndarray::ArrayView2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cold::encode_cold_items;
use crate::dae::DaeParams;
use crate::data::DatasetSplit;
use crate::model::{nth_non_member, CodeMatrix, InteractionSet};
use crate::{DphError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub n_negatives: usize,
    pub k_max: usize,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            n_negatives: 1000,
            k_max: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalTag {
    Sparse,
    Cold,
}

impl EvalTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalTag::Sparse => "sparse",
            EvalTag::Cold => "cold",
        }
    }
}

/// Metrics for one test set.
///
/// When some user has fewer than `n_negatives` eligible items, that case
/// ranks against all of them and counts toward `shortfall_cases`;
/// `null_accuracy_at_k` is the hit rate a uniformly random ranking would
/// get on exactly these candidate lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tag: EvalTag,
    pub accuracy_at_k: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub n_test_cases: usize,
    pub n_negatives: usize,
    pub shortfall_cases: usize,
    pub null_accuracy_at_k: BTreeMap<usize, f64>,
    pub mean_ns_per_query: f64,
}

impl EvalReport {
    pub fn accuracy(&self, k: usize) -> f64 {
        self.accuracy_at_k.get(&k).copied().unwrap_or(f64::NAN)
    }

    pub fn null_accuracy(&self, k: usize) -> f64 {
        self.null_accuracy_at_k.get(&k).copied().unwrap_or(f64::NAN)
    }

    /// Accuracy@k non-decreasing in k, `Accuracy@1 <= MRR <= 1`.
    pub fn is_consistent(&self) -> bool {
        let acc: Vec<f64> = self.accuracy_at_k.values().copied().collect();
        let monotone = acc.windows(2).all(|w| w[0] <= w[1]);
        let a1 = acc.first().copied().unwrap_or(0.0);
        monotone && a1 <= self.mrr + 1e-12 && self.mrr <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReports {
    pub sparse: EvalReport,
    pub cold: EvalReport,
}

impl EvalReports {
    /// Flat `split,metric,k,value` rows; `k` is empty for MRR.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fail = |e: csv::Error| DphError::Format(format!("writing report csv: {e}"));
        w.write_record(["split", "metric", "k", "value"]).map_err(fail)?;
        for report in [&self.sparse, &self.cold] {
            let tag = report.tag.as_str();
            for (k, v) in &report.accuracy_at_k {
                w.write_record([tag, "accuracy", &k.to_string(), &v.to_string()])
                    .map_err(fail)?;
            }
            w.write_record([tag, "mrr", "", &report.mrr.to_string()]).map_err(fail)?;
            for (k, v) in &report.null_accuracy_at_k {
                w.write_record([tag, "null_accuracy", &k.to_string(), &v.to_string()])
                    .map_err(fail)?;
            }
        }
        w.flush().map_err(|e| DphError::Format(format!("writing report csv: {e}")))
    }
}

struct CaseOutcome {
    rank: usize,
    candidates: usize,
    short: bool,
    nanos: u128,
}

fn check_codes(train: &InteractionSet, users: &CodeMatrix, items: &CodeMatrix) -> Result<()> {
    if users.count() != train.n_users() || items.count() != train.n_items() || users.r() != items.r()
    {
        return Err(DphError::Dimension(format!(
            "{} user / {} item codes for {} users and {} items",
            users.count(),
            items.count(),
            train.n_users(),
            train.n_items()
        )));
    }
    Ok(())
}

fn rank_case(
    train: &InteractionSet,
    users: &CodeMatrix,
    items: &CodeMatrix,
    (u, i): (usize, usize),
    n_negatives: usize,
    seed: u64,
) -> CaseOutcome {
    let start = Instant::now();
    let mut excluded = train.user_positives(u).to_vec();
    if let Err(at) = excluded.binary_search(&i) {
        excluded.insert(at, i);
    }
    let eligible = train.n_items() - excluded.len();
    let short = eligible < n_negatives;
    let own = users.hamming_to(u, items, i);
    let beats = |j: usize| {
        let h = users.hamming_to(u, items, j);
        h < own || (h == own && j < i)
    };
    let ahead = if short {
        (0..train.n_items())
            .filter(|j| excluded.binary_search(j).is_err())
            .filter(|&j| beats(j))
            .count()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        index::sample(&mut rng, eligible, n_negatives)
            .into_iter()
            .filter(|&t| beats(nth_non_member(&excluded, t)))
            .count()
    };
    CaseOutcome {
        rank: ahead + 1,
        candidates: 1 + eligible.min(n_negatives),
        short,
        nanos: start.elapsed().as_nanos(),
    }
}

/// Ranks each held-out positive against sampled non-positive items.
///
/// Case `c` draws its negatives with seed `settings.seed ^ c`, so the result
/// does not depend on how cases are spread over threads.
pub fn evaluate_cases(
    train: &InteractionSet,
    cases: &[(usize, usize)],
    users: &CodeMatrix,
    items: &CodeMatrix,
    tag: EvalTag,
    settings: &EvalSettings,
) -> Result<EvalReport> {
    check_codes(train, users, items)?;
    if settings.k_max == 0 {
        return Err(DphError::InvalidArgument("k_max must be >= 1".into()));
    }
    if let Some(&(u, i)) = cases
        .iter()
        .find(|&&(u, i)| u >= train.n_users() || i >= train.n_items())
    {
        return Err(DphError::InvalidArgument(format!("test pair ({u}, {i}) out of range")));
    }
    let outcomes: Vec<CaseOutcome> = cases
        .par_iter()
        .enumerate()
        .map(|(c, &pair)| {
            rank_case(train, users, items, pair, settings.n_negatives, settings.seed ^ c as u64)
        })
        .collect();
    let n = outcomes.len();
    let denom = n.max(1) as f64;
    let mut accuracy_at_k = BTreeMap::new();
    let mut null_accuracy_at_k = BTreeMap::new();
    for k in 1..=settings.k_max {
        let hits = outcomes.iter().filter(|o| o.rank <= k).count();
        accuracy_at_k.insert(k, hits as f64 / denom);
        let null: f64 = outcomes
            .iter()
            .map(|o| k.min(o.candidates) as f64 / o.candidates as f64)
            .sum();
        null_accuracy_at_k.insert(k, null / denom);
    }
    let report = EvalReport {
        tag,
        accuracy_at_k,
        mrr: outcomes.iter().map(|o| 1.0 / o.rank as f64).sum::<f64>() / denom,
        n_test_cases: n,
        n_negatives: settings.n_negatives,
        shortfall_cases: outcomes.iter().filter(|o| o.short).count(),
        null_accuracy_at_k,
        mean_ns_per_query: outcomes.iter().map(|o| o.nanos as f64).sum::<f64>() / denom,
    };
    if report.shortfall_cases > 0 {
        log::warn!(
            "{}: {} of {n} cases had fewer than {} eligible negatives",
            tag.as_str(),
            report.shortfall_cases,
            settings.n_negatives
        );
    }
    debug_assert!(report.is_consistent());
    Ok(report)
}

/// Sparse and cold reports for a split. `items` must hold codes for every
/// item; the cold ones are overwritten with their content codes.
pub fn evaluate(
    split: &DatasetSplit,
    users: &CodeMatrix,
    items: &CodeMatrix,
    dae: &DaeParams,
    content: ArrayView2<'_, f64>,
    settings: &EvalSettings,
) -> Result<EvalReports> {
    let scored = encode_cold_items(dae, content, items, &split.cold_items)?;
    Ok(EvalReports {
        sparse: evaluate_cases(
            &split.train,
            &split.test_sparse,
            users,
            &scored,
            EvalTag::Sparse,
            settings,
        )?,
        cold: evaluate_cases(&split.train, &split.test_cold, users, &scored, EvalTag::Cold, settings)?,
    })
}

/// Sampled AUC over held-out positives: a random test pair `(u, i)` against
/// an item that is positive for `u` in neither train nor test. Ties score
/// `tie_credit`.
pub fn heldout_auc(
    train: &InteractionSet,
    test: &[(usize, usize)],
    users: &CodeMatrix,
    items: &CodeMatrix,
    samples: usize,
    seed: u64,
    tie_credit: f64,
) -> Result<f64> {
    check_codes(train, users, items)?;
    if test.is_empty() || samples == 0 {
        return Err(DphError::UndefinedMetric("no held-out pairs to score".into()));
    }
    let mut known: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(u, i) in test {
        if u >= train.n_users() || i >= train.n_items() {
            return Err(DphError::InvalidArgument(format!("test pair ({u}, {i}) out of range")));
        }
        known.entry(u).or_insert_with(|| train.user_positives(u).to_vec()).push(i);
    }
    for list in known.values_mut() {
        list.sort_unstable();
        list.dedup();
    }
    let usable: Vec<(usize, usize)> = test
        .iter()
        .copied()
        .filter(|(u, _)| known[u].len() < train.n_items())
        .collect();
    if usable.is_empty() {
        return Err(DphError::UndefinedMetric("no held-out user has a negative item".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut score = 0.0;
    for _ in 0..samples {
        let (u, i) = usable[rng.random_range(0..usable.len())];
        let excluded = &known[&u];
        let j = nth_non_member(excluded, rng.random_range(0..train.n_items() - excluded.len()));
        let (hi, hj) = (users.hamming_to(u, items, i), users.hamming_to(u, items, j));
        score += match hi.cmp(&hj) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => tie_credit,
            std::cmp::Ordering::Greater => 0.0,
        };
    }
    Ok(score / samples as f64)
}
