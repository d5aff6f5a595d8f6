use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ranking::{topk, topk_dot};
use crate::model::CodeMatrix;
use crate::{DphError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub m_list: Vec<usize>,
    pub r: usize,
    pub queries: usize,
    pub trials: usize,
    pub k: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            m_list: vec![200_000, 400_000, 600_000, 800_000, 1_000_000],
            r: 64,
            queries: 20,
            trials: 5,
            k: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Hamming,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub m: usize,
    pub representation: Representation,
    /// Median over trials of the mean time per query.
    pub ns_per_query: f64,
    /// One bit per dimension for codes, eight bytes for floats.
    pub bytes_total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Both paths agreed on every query once the float features were
    /// replaced by their own signs.
    pub rankings_match: bool,
}

impl BenchReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fail = |e: csv::Error| DphError::Format(format!("writing bench csv: {e}"));
        w.write_record(["m", "representation", "ns_per_query", "bytes_total"]).map_err(fail)?;
        for row in &self.rows {
            let rep = match row.representation {
                Representation::Hamming => "hamming",
                Representation::Real => "real",
            };
            w.write_record([
                row.m.to_string(),
                rep.to_string(),
                format!("{:.1}", row.ns_per_query),
                row.bytes_total.to_string(),
            ])
            .map_err(fail)?;
        }
        w.flush().map_err(|e| DphError::Format(format!("writing bench csv: {e}")))
    }
}

fn sign_codes(values: &[f64], r: usize) -> CodeMatrix {
    let count = values.len() / r;
    let mut codes = CodeMatrix::new(r, count);
    for (e, row) in values.chunks_exact(r).enumerate() {
        for (k, &v) in row.iter().enumerate() {
            if v < 0.0 {
                codes.set(e, k, -1);
            }
        }
    }
    codes
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Times exact top-`k` by packed Hamming distance and by float dot product
/// over Gaussian features and their sign codes.
pub fn bench_retrieval(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.r == 0 || cfg.queries == 0 || cfg.trials == 0 || cfg.k == 0 {
        return Err(DphError::InvalidArgument(
            "r, queries, trials and k must all be >= 1".into(),
        ));
    }
    let r = cfg.r;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let query_values: Vec<f64> = (0..cfg.queries * r).map(|_| StandardNormal.sample(&mut rng)).collect();
    let query_codes = sign_codes(&query_values, r);
    let query_signs: Vec<f64> = query_values.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();

    let mut rows = Vec::with_capacity(2 * cfg.m_list.len());
    let mut rankings_match = true;
    for &m in &cfg.m_list {
        if m == 0 {
            return Err(DphError::InvalidArgument("item counts must be >= 1".into()));
        }
        let mut features: Vec<f64> = (0..m * r).map(|_| StandardNormal.sample(&mut rng)).collect();
        let codes = sign_codes(&features, r);

        let run_hamming = || -> Result<()> {
            for q in 0..cfg.queries {
                std::hint::black_box(topk(query_codes.code(q), &codes, cfg.k, None)?);
            }
            Ok(())
        };
        let run_real = |features: &[f64]| -> Result<()> {
            for q in query_values.chunks_exact(r) {
                std::hint::black_box(topk_dot(q, features, cfg.k)?);
            }
            Ok(())
        };
        topk(query_codes.code(0), &codes, cfg.k, None)?;
        topk_dot(&query_values[..r], &features, cfg.k)?;
        let (mut hamming_ns, mut real_ns) = (Vec::new(), Vec::new());
        for _ in 0..cfg.trials {
            let start = Instant::now();
            run_hamming()?;
            hamming_ns.push(start.elapsed().as_nanos() as f64 / cfg.queries as f64);
            let start = Instant::now();
            run_real(&features)?;
            real_ns.push(start.elapsed().as_nanos() as f64 / cfg.queries as f64);
        }

        // cross-check: the float path over the codes' own ±1 values must
        // reproduce the Hamming ranking exactly
        for v in features.iter_mut() {
            *v = if *v < 0.0 { -1.0 } else { 1.0 };
        }
        for (q, signs) in query_signs.chunks_exact(r).enumerate() {
            let by_bits = topk(query_codes.code(q), &codes, cfg.k, None)?;
            let by_floats = topk_dot(signs, &features, cfg.k)?;
            rankings_match &= by_bits.items == by_floats;
        }
        drop(features);

        let bits = (m * r) as u64;
        rows.push(BenchRow {
            m,
            representation: Representation::Hamming,
            ns_per_query: median(hamming_ns),
            bytes_total: bits.div_ceil(8),
        });
        rows.push(BenchRow {
            m,
            representation: Representation::Real,
            ns_per_query: median(real_ns),
            bytes_total: bits * 8,
        });
        log::info!("bench m={m}: done");
    }
    Ok(BenchReport { rows, rankings_match })
}
