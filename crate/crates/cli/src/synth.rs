//! Planted block model for desk-scale ground truth.
//!
//! Users and items are dealt round-robin into latent blocks. A user likes an
//! item of its own block with probability `density`, and an item of another
//! block with probability `noise * density`. Each document mixes words from
//! its block's private vocabulary with words from a shared pool, so content
//! alone predicts the block. A fraction of items get only one to four
//! interactions, which makes them cold under the default split threshold.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fsutil::{write_atomic, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub n_users: usize,
    pub n_items: usize,
    pub blocks: usize,
    pub density: f64,
    pub noise: f64,
    pub cold_fraction: f64,
    pub words_per_doc: usize,
    pub block_vocab: usize,
    pub shared_vocab: usize,
    /// Share of each document drawn from its block's vocabulary.
    pub topic_share: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 300,
            blocks: 4,
            density: 0.3,
            noise: 0.05,
            cold_fraction: 0.1,
            words_per_doc: 40,
            block_vocab: 30,
            shared_vocab: 60,
            topic_share: 0.6,
            seed: 0,
        }
    }
}

/// Ground truth written next to the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blocks {
    pub user_blocks: BTreeMap<String, usize>,
    pub item_blocks: BTreeMap<String, usize>,
    pub cold_eligible: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    /// `(user, item)` positives in generation order.
    pub pairs: Vec<(String, String)>,
    pub documents: Vec<(String, String)>,
    pub blocks: Blocks,
}

pub fn user_key(u: usize) -> String {
    format!("u{u:04}")
}

pub fn item_key(i: usize) -> String {
    format!("i{i:04}")
}

/// Distinct alphabetic pseudo-word per id (the tokenizer drops anything
/// containing digits).
fn pseudo_word(id: usize) -> String {
    const C: &[u8] = b"bcdfghklmnprstvz";
    const V: &[u8] = b"aeiou";
    let mut n = id;
    let mut w = String::from("q");
    for _ in 0..3 {
        w.push(C[n % C.len()] as char);
        n /= C.len();
        w.push(V[n % V.len()] as char);
        n /= V.len();
    }
    debug_assert_eq!(n, 0, "pseudo-word space exhausted");
    w
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.blocks < 2 {
            bail!("need at least 2 blocks, got {}", self.blocks);
        }
        if self.n_users < self.blocks || self.n_items < self.blocks {
            bail!("{} users / {} items cannot fill {} blocks", self.n_users, self.n_items, self.blocks);
        }
        for (name, v) in [
            ("density", self.density),
            ("noise", self.noise),
            ("cold_fraction", self.cold_fraction),
            ("topic_share", self.topic_share),
        ] {
            if !(0.0..=1.0).contains(&v) {
                bail!("{name} must lie in [0, 1], got {v}");
            }
        }
        if self.words_per_doc == 0 || self.block_vocab == 0 {
            bail!("documents need words_per_doc >= 1 and block_vocab >= 1");
        }
        if self.blocks * self.block_vocab + self.shared_vocab > 16usize.pow(3) * 125 {
            bail!("vocabulary too large for the pseudo-word generator");
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SynthCorpus> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let user_block = |u: usize| u % self.blocks;
        let item_block = |i: usize| i % self.blocks;
        let mut users_in: Vec<Vec<usize>> = vec![Vec::new(); self.blocks];
        for u in 0..self.n_users {
            users_in[user_block(u)].push(u);
        }
        let n_cold = (self.cold_fraction * self.n_items as f64).round() as usize;
        let mut cold = vec![false; self.n_items];
        // spread cold items over blocks by taking every k-th id
        for c in 0..n_cold {
            cold[c * self.n_items / n_cold.max(1)] = true;
        }

        let mut liked: Vec<Vec<usize>> = vec![Vec::new(); self.n_users];
        for i in 0..self.n_items {
            let b = item_block(i);
            if cold[i] {
                let k = rng.random_range(1..=4);
                for _ in 0..k {
                    let own = !rng.random_bool(self.noise);
                    let block = if own {
                        b
                    } else {
                        (b + rng.random_range(1..self.blocks)) % self.blocks
                    };
                    let &u = users_in[block].choose(&mut rng).expect("blocks are non-empty");
                    if !liked[u].contains(&i) {
                        liked[u].push(i);
                    }
                }
                continue;
            }
            for (u, likes) in liked.iter_mut().enumerate() {
                let p = if user_block(u) == b { self.density } else { self.noise * self.density };
                if rng.random_bool(p) {
                    likes.push(i);
                }
            }
        }
        let mut pairs = Vec::new();
        for (u, likes) in liked.iter_mut().enumerate() {
            likes.sort_unstable();
            pairs.extend(likes.iter().map(|&i| (user_key(u), item_key(i))));
        }

        let documents = (0..self.n_items)
            .map(|i| {
                let b = item_block(i);
                let mut text = String::new();
                for w in 0..self.words_per_doc {
                    let id = if self.shared_vocab == 0 || rng.random_bool(self.topic_share) {
                        b * self.block_vocab + rng.random_range(0..self.block_vocab)
                    } else {
                        self.blocks * self.block_vocab + rng.random_range(0..self.shared_vocab)
                    };
                    if w > 0 {
                        text.push(' ');
                    }
                    let _ = write!(text, "{}", pseudo_word(id));
                }
                (item_key(i), text)
            })
            .collect();

        let blocks = Blocks {
            user_blocks: (0..self.n_users).map(|u| (user_key(u), user_block(u))).collect(),
            item_blocks: (0..self.n_items).map(|i| (item_key(i), item_block(i))).collect(),
            cold_eligible: (0..self.n_items).filter(|&i| cold[i]).map(item_key).collect(),
        };
        Ok(SynthCorpus { pairs, documents, blocks })
    }
}

impl SynthCorpus {
    /// Writes `interactions.csv`, `documents.jsonl` and `blocks.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut csv = String::from("user,item,rating\n");
        for (u, i) in &self.pairs {
            let _ = writeln!(csv, "{u},{i},1");
        }
        write_atomic(&dir.join("interactions.csv"), csv.as_bytes())?;
        let mut docs = String::new();
        for (item, text) in &self.documents {
            docs.push_str(&serde_json::to_string(&serde_json::json!({ "item": item, "text": text }))?);
            docs.push('\n');
        }
        write_atomic(&dir.join("documents.jsonl"), docs.as_bytes())?;
        write_json(&dir.join("blocks.json"), &self.blocks)
    }
}
