use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{DphError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawInteraction {
    pub user: String,
    pub item: String,
    pub rating: f64,
}

/// Raw explicit ratings plus item documents keyed by item key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawCorpus {
    pub interactions: Vec<RawInteraction>,
    pub documents: BTreeMap<String, String>,
}

/// Reads `user,item,rating` CSV (header required).
pub fn read_interactions_csv(path: impl AsRef<Path>) -> Result<Vec<RawInteraction>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DphError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    for col in ["user", "item", "rating"] {
        if !headers.iter().any(|h| h == col) {
            return Err(DphError::Parse {
                path: path.display().to_string(),
                line: 1,
                detail: format!("missing column `{col}` in header"),
            });
        }
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> DphError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    DphError::Parse {
        path: path.display().to_string(),
        line,
        detail: e.to_string(),
    }
}

/// Reads JSON-lines documents with fields `item` and `text`. Blank lines are
/// skipped; a repeated item key keeps the last text.
pub fn read_documents_jsonl(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    #[derive(Deserialize)]
    struct Doc {
        item: String,
        text: String,
    }
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DphError::io(path, e))?;
    let mut docs = BTreeMap::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DphError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Doc = serde_json::from_str(&line).map_err(|e| DphError::Parse {
            path: path.display().to_string(),
            line: n as u64 + 1,
            detail: e.to_string(),
        })?;
        docs.insert(doc.item, doc.text);
    }
    Ok(docs)
}

/// Collapses ratings into one positive per distinct `(user, item)`, in order
/// of first appearance.
pub fn binarize(raw: &RawCorpus) -> Vec<(String, String)> {
    let mut seen = HashSet::new();
    raw.interactions
        .iter()
        .filter(|x| seen.insert((x.user.as_str(), x.item.as_str())))
        .map(|x| (x.user.clone(), x.item.clone()))
        .collect()
}

/// Binarized feedback with dense ids assigned in order of first appearance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicitFeedback {
    pub users: Vec<String>,
    pub items: Vec<String>,
    pub pairs: Vec<(usize, usize)>,
}

impl ImplicitFeedback {
    pub fn from_raw(raw: &RawCorpus) -> Self {
        let mut user_ids: HashMap<String, usize> = HashMap::new();
        let mut item_ids: HashMap<String, usize> = HashMap::new();
        let mut users = Vec::new();
        let mut items = Vec::new();
        let pairs = binarize(raw)
            .into_iter()
            .map(|(u, i)| {
                let uid = *user_ids.entry(u.clone()).or_insert_with(|| {
                    users.push(u);
                    users.len() - 1
                });
                let iid = *item_ids.entry(i.clone()).or_insert_with(|| {
                    items.push(i);
                    items.len() - 1
                });
                (uid, iid)
            })
            .collect();
        Self {
            users,
            items,
            pairs,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Fraction of unobserved user-item cells.
    pub fn sparsity(&self) -> f64 {
        let cells = (self.n_users() * self.n_items()) as f64;
        if cells == 0.0 {
            return 1.0;
        }
        1.0 - self.pairs.len() as f64 / cells
    }

    /// Per-item documents in item-id order; `None` where the item has none.
    pub fn documents<'a>(&self, docs: &'a BTreeMap<String, String>) -> Vec<Option<&'a str>> {
        self.items.iter().map(|k| docs.get(k).map(String::as_str)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn raw(rows: &[(&str, &str, f64)]) -> RawCorpus {
        RawCorpus {
            interactions: rows
                .iter()
                .map(|&(u, i, r)| RawInteraction {
                    user: u.into(),
                    item: i.into(),
                    rating: r,
                })
                .collect(),
            documents: BTreeMap::new(),
        }
    }

    #[test]
    fn binarize_examples() {
        assert_eq!(
            binarize(&raw(&[("u1", "i1", 4.0), ("u1", "i1", 2.0)])),
            vec![("u1".to_string(), "i1".to_string())]
        );
        assert_eq!(
            binarize(&raw(&[("u1", "i1", 1.0), ("u2", "i1", 5.0)])),
            vec![("u1".into(), "i1".into()), ("u2".into(), "i1".into())]
        );
        assert!(binarize(&RawCorpus::default()).is_empty());
    }

    #[test]
    fn feedback_ids_follow_first_appearance() {
        let fb = ImplicitFeedback::from_raw(&raw(&[
            ("b", "y", 1.0),
            ("a", "x", 1.0),
            ("b", "x", 1.0),
            ("b", "y", 3.0),
        ]));
        assert_eq!(fb.users, vec!["b", "a"]);
        assert_eq!(fb.items, vec!["y", "x"]);
        assert_eq!(fb.pairs, vec![(0, 0), (1, 1), (0, 1)]);
        assert!((fb.sparsity() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn csv_and_jsonl_readers() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("r.csv");
        std::fs::write(&csv_path, "user,item,rating\nu1,i1,4\nu2,i1,2.5\n").unwrap();
        let rows = read_interactions_csv(&csv_path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].rating, 2.5);

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "user,item,rating\nu1,i1,oops\n").unwrap();
        match read_interactions_csv(&bad) {
            Err(DphError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }

        let jl = dir.path().join("d.jsonl");
        let mut f = File::create(&jl).unwrap();
        writeln!(f, r#"{{"item":"i1","text":"red shoes"}}"#).unwrap();
        writeln!(f).unwrap();
        writeln!(f, r#"{{"item":"i2","text":"blue hat"}}"#).unwrap();
        drop(f);
        let docs = read_documents_jsonl(&jl).unwrap();
        assert_eq!(docs["i2"], "blue hat");

        let missing = read_documents_jsonl(dir.path().join("nope.jsonl")).unwrap_err();
        assert!(missing.to_string().contains("nope.jsonl"));
    }
}
