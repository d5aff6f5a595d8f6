use crate::model::{hamming, CodeMatrix};
use crate::{DphError, Result};

/// Items ordered by ascending Hamming distance, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    pub items: Vec<usize>,
    pub distances: Vec<u32>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Exact top-`k` of `items` (restricted to `candidates` when given) for a
/// packed query code.
///
/// Distances go into a histogram over `0..=r` first, which fixes the cutoff
/// distance; a second sweep in id order then collects the winners, so the
/// tie rule costs nothing extra.
pub fn topk(
    query: &[u64],
    items: &CodeMatrix,
    k: usize,
    candidates: Option<&[usize]>,
) -> Result<RankedList> {
    if k == 0 {
        return Err(DphError::InvalidArgument("k must be >= 1".into()));
    }
    if query.len() != items.words_per_code() {
        return Err(DphError::Dimension(format!(
            "query has {} words, codes have {}",
            query.len(),
            items.words_per_code()
        )));
    }
    let ids: Vec<usize> = match candidates {
        Some(c) => {
            if let Some(&bad) = c.iter().find(|&&i| i >= items.count()) {
                return Err(DphError::InvalidArgument(format!("candidate {bad} out of range")));
            }
            let mut c = c.to_vec();
            c.sort_unstable();
            c.dedup();
            c
        }
        None => (0..items.count()).collect(),
    };
    if ids.is_empty() {
        return Err(DphError::EmptyCandidates);
    }
    let dist: Vec<u32> = ids.iter().map(|&i| hamming(query, items.code(i))).collect();
    let mut histogram = vec![0usize; items.r() + 1];
    for &d in &dist {
        histogram[d as usize] += 1;
    }
    let k = k.min(ids.len());
    let mut cutoff = 0;
    let mut below = 0;
    while below + histogram[cutoff] < k {
        below += histogram[cutoff];
        cutoff += 1;
    }
    let mut at_cutoff = k - below;
    let mut picked: Vec<(u32, usize)> = Vec::with_capacity(k);
    for (&i, &d) in ids.iter().zip(&dist) {
        if (d as usize) < cutoff {
            picked.push((d, i));
        } else if d as usize == cutoff && at_cutoff > 0 {
            picked.push((d, i));
            at_cutoff -= 1;
        }
    }
    picked.sort_unstable();
    Ok(RankedList {
        items: picked.iter().map(|p| p.1).collect(),
        distances: picked.iter().map(|p| p.0).collect(),
    })
}

/// Top-`k` rows of the row-major `count x r` matrix by descending dot product
/// with `query`, ties by ascending id.
pub fn topk_dot(query: &[f64], features: &[f64], k: usize) -> Result<Vec<usize>> {
    let r = query.len();
    if r == 0 || features.len() % r != 0 {
        return Err(DphError::Dimension("feature matrix is not count x r".into()));
    }
    let count = features.len() / r;
    if count == 0 {
        return Err(DphError::EmptyCandidates);
    }
    if k == 0 {
        return Err(DphError::InvalidArgument("k must be >= 1".into()));
    }
    let k = k.min(count);
    let better = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    // running top-k kept sorted; new entries only enter when they beat the last
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, row) in features.chunks_exact(r).enumerate() {
        let s: f64 = row.iter().zip(query).map(|(a, b)| a * b).sum();
        if best.len() == k {
            if better(&(s, i), &best[k - 1]).is_ge() {
                continue;
            }
            best.pop();
        }
        let at = best.partition_point(|e| better(e, &(s, i)).is_lt());
        best.insert(at, (s, i));
    }
    Ok(best.into_iter().map(|(_, i)| i).collect())
}
