use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::{DphError, Result};

pub const DEFAULT_VOCAB_CAP: usize = 8000;

/// Selected terms with their inverse document frequencies, ordered by
/// decreasing selection score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    pub scores: Vec<f64>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

fn term_counts(doc: &[String]) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for t in doc {
        *counts.entry(t.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Keeps the `cap` terms with the highest `max_d tf(t, d) * ln(N / df(t))`.
///
/// `tf` is the raw count. Ties are broken by ascending term.
pub fn build_vocab(docs: &[Vec<String>], cap: usize) -> Result<Vocabulary> {
    let n_docs = docs.len() as f64;
    let mut df: HashMap<&str, usize> = HashMap::new();
    let mut max_tf: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        for (term, count) in term_counts(doc) {
            *df.entry(term).or_insert(0) += 1;
            let m = max_tf.entry(term).or_insert(0);
            *m = (*m).max(count);
        }
    }
    if df.is_empty() {
        return Err(DphError::EmptyVocabulary);
    }
    let mut scored: Vec<(&str, f64, f64)> = df
        .iter()
        .map(|(&term, &d)| {
            let idf = (n_docs / d as f64).ln();
            (term, idf, max_tf[term] as f64 * idf)
        })
        .collect();
    scored.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(b.0)));
    scored.truncate(cap);
    Ok(Vocabulary {
        terms: scored.iter().map(|s| s.0.to_string()).collect(),
        idf: scored.iter().map(|s| s.1).collect(),
        scores: scored.iter().map(|s| s.2).collect(),
    })
}

/// Per-item TF-IDF vectors over a fixed vocabulary, each L2-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentMatrix {
    pub vocab: Vec<String>,
    /// `items x vocab`.
    pub vectors: Array2<f64>,
    /// Rows that came out all-zero (no document, or no vocabulary term).
    pub empty: Vec<bool>,
}

impl ContentMatrix {
    pub fn n_items(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn row(&self, item: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(item)
    }

    /// Rows restricted to `items`, in that order.
    pub fn select(&self, items: &[usize]) -> ContentMatrix {
        ContentMatrix {
            vocab: self.vocab.clone(),
            vectors: self.vectors.select(ndarray::Axis(0), items),
            empty: items.iter().map(|&i| self.empty[i]).collect(),
        }
    }
}

/// Builds TF-IDF rows for `docs` (one token list per item; empty for items
/// without a document).
pub fn vectorize(docs: &[Vec<String>], vocab: &Vocabulary) -> ContentMatrix {
    let index: HashMap<&str, usize> = vocab
        .terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let mut vectors = Array2::zeros((docs.len(), vocab.len()));
    let mut empty = vec![true; docs.len()];
    for (row, doc) in docs.iter().enumerate() {
        for (term, count) in term_counts(doc) {
            if let Some(&col) = index.get(term) {
                vectors[(row, col)] = count as f64 * vocab.idf[col];
            }
        }
        let norm = vectors.row(row).dot(&vectors.row(row)).sqrt();
        if norm > 0.0 {
            vectors.row_mut(row).mapv_inplace(|v| v / norm);
            empty[row] = false;
        }
    }
    ContentMatrix {
        vocab: vocab.terms.clone(),
        vectors,
        empty,
    }
}

#[derive(Serialize, Deserialize)]
struct ContentRepr {
    vocab: Vec<String>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Serialize for ContentMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows = self
            .vectors
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(i, &v)| (i, v))
                    .collect()
            })
            .collect();
        ContentRepr {
            vocab: self.vocab.clone(),
            rows,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ContentMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = ContentRepr::deserialize(deserializer)?;
        let dim = repr.vocab.len();
        let mut vectors = Array2::zeros((repr.rows.len(), dim));
        let mut empty = vec![true; repr.rows.len()];
        for (r, row) in repr.rows.iter().enumerate() {
            for &(c, v) in row {
                if c >= dim {
                    return Err(serde::de::Error::custom(format!(
                        "column {c} out of range for vocabulary of {dim}"
                    )));
                }
                vectors[(r, c)] = v;
                empty[r] = false;
            }
        }
        Ok(ContentMatrix {
            vocab: repr.vocab,
            vectors,
            empty,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn vocab_scores_by_max_tf_idf() {
        let docs = vec![toks("x x y"), toks("y")];
        let v = build_vocab(&docs, 10).unwrap();
        assert_eq!(v.terms, vec!["x", "y"]);
        assert!((v.idf[0] - 2f64.ln()).abs() < 1e-15);
        assert!((v.scores[0] - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(v.idf[1], 0.0);
        assert_eq!(build_vocab(&docs, 1).unwrap().terms, vec!["x"]);
    }

    #[test]
    fn single_doc_is_lexicographic() {
        let v = build_vocab(&[toks("pear apple fig apple")], 10).unwrap();
        assert_eq!(v.terms, vec!["apple", "fig", "pear"]);
        assert!(v.scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            build_vocab(&[vec![], vec![]], 5),
            Err(DphError::EmptyVocabulary)
        ));
    }

    #[test]
    fn vectorize_normalizes_and_flags() {
        let docs = vec![toks("x x y z"), toks("z"), vec![], toks("x x y z"), toks("q")];
        let vocab = build_vocab(&docs[..4], 10).unwrap();
        let c = vectorize(&docs, &vocab);
        assert_eq!(c.empty, vec![false, false, true, false, true]);
        let norm = c.row(0).dot(&c.row(0)).sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert_eq!(c.row(0), c.row(3));
        assert!(c.vectors.iter().all(|&v| (0.0..=1.0).contains(&v)));

        let json = serde_json::to_string(&c).unwrap();
        let back: ContentMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }
}
