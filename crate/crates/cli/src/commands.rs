use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use dph_core::artifact::ModelArtifact;
use dph_core::dae::{pretrain, DaeParams};
use dph_core::data::{
    build_vocab, read_documents_jsonl, read_interactions_csv, split, tokenize, vectorize,
    ContentMatrix, DatasetSplit, ImplicitFeedback, RawCorpus,
};
use dph_core::retrieval::{bench_retrieval, evaluate, heldout_auc, BenchReport, EvalReports};
use dph_core::solver::fit_excluding;
use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::fsutil::{read, read_json, sha256_hex, write_atomic, write_json};
use crate::synth::SynthParams;

pub const SPLIT_FILE: &str = "split.json";
pub const CONTENT_FILE: &str = "content.json";
pub const MODEL_FILE: &str = "model.dph";
pub const TRACE_FILE: &str = "loss_trace.csv";
pub const REPORT_JSON: &str = "eval_report.json";
pub const REPORT_CSV: &str = "eval_report.csv";
pub const BENCH_FILE: &str = "bench.csv";

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Dataset statistics in the layout of the usual dataset table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub positives: usize,
    pub sparsity: f64,
    pub vocabulary: usize,
    pub train: usize,
    pub test_sparse: usize,
    pub test_cold: usize,
    pub cold_items: usize,
}

impl DatasetStats {
    pub fn table(&self) -> String {
        let mut out = String::new();
        let rows: [(&str, String); 9] = [
            ("#Users", self.users.to_string()),
            ("#Items", self.items.to_string()),
            ("#Positives", self.positives.to_string()),
            ("Sparsity", format!("{:.4}%", 100.0 * self.sparsity)),
            ("#Vocabulary", self.vocabulary.to_string()),
            ("#Train", self.train.to_string()),
            ("#Test (sparse)", self.test_sparse.to_string()),
            ("#Test (cold)", self.test_cold.to_string()),
            ("#Cold items", self.cold_items.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<16}{v:>12}");
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PrepareManifest {
    version: String,
    config_hash: String,
    interactions_sha256: String,
    documents_sha256: String,
    split_sha256: String,
    content_sha256: String,
    rep_index: usize,
    split_seed: u64,
    stats: DatasetStats,
}

/// Reads raw data, builds content vectors and the split, and writes both.
pub fn prepare(cfg: &RunConfig) -> Result<DatasetStats> {
    cfg.validate()?;
    for path in [&cfg.paths.interactions, &cfg.paths.documents] {
        ensure!(path.exists(), "input file {} does not exist", path.display());
    }
    let interactions = read_interactions_csv(&cfg.paths.interactions)?;
    let documents = read_documents_jsonl(&cfg.paths.documents)?;
    let raw = RawCorpus { interactions, documents };
    let feedback = ImplicitFeedback::from_raw(&raw);
    ensure!(!feedback.pairs.is_empty(), "{} holds no interactions", cfg.paths.interactions.display());

    let tokens: Vec<Vec<String>> = feedback
        .documents(&raw.documents)
        .into_iter()
        .map(|doc| doc.map(|t| tokenize(t, cfg.data.stem)).unwrap_or_default())
        .collect();
    let vocab = build_vocab(&tokens, cfg.data.vocab_cap)?;
    let content = vectorize(&tokens, &vocab);
    let split = split(&feedback, &content, &cfg.split, cfg.data.rep_index)?;

    let stats = DatasetStats {
        users: feedback.n_users(),
        items: feedback.n_items(),
        positives: feedback.pairs.len(),
        sparsity: feedback.sparsity(),
        vocabulary: content.dim(),
        train: split.train.n_positives(),
        test_sparse: split.test_sparse.len(),
        test_cold: split.test_cold.len(),
        cold_items: split.cold_items.len(),
    };
    let split_bytes = serde_json::to_vec(&split)?;
    let content_bytes = serde_json::to_vec(&content)?;
    write_atomic(&cfg.output(SPLIT_FILE), &split_bytes)?;
    write_atomic(&cfg.output(CONTENT_FILE), &content_bytes)?;
    write_json(
        &cfg.output("prepare_manifest.json"),
        &PrepareManifest {
            version: VERSION.into(),
            config_hash: cfg.hash()?,
            interactions_sha256: sha256_hex(&read(&cfg.paths.interactions)?),
            documents_sha256: sha256_hex(&read(&cfg.paths.documents)?),
            split_sha256: sha256_hex(&split_bytes),
            content_sha256: sha256_hex(&content_bytes),
            rep_index: cfg.data.rep_index,
            split_seed: cfg.split.seed,
            stats: stats.clone(),
        },
    )?;
    log::info!("prepare: wrote {} and {}", SPLIT_FILE, CONTENT_FILE);
    Ok(stats)
}

/// A prepared split plus its content, and the digest that ties models to it.
pub struct Prepared {
    pub split: DatasetSplit,
    pub content: ContentMatrix,
    pub digest: String,
}

pub fn load_prepared(cfg: &RunConfig) -> Result<Prepared> {
    let split_path = cfg.output(SPLIT_FILE);
    let bytes = read(&split_path).context("run `prepare` first")?;
    let split: DatasetSplit =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", split_path.display()))?;
    let content: ContentMatrix = read_json(&cfg.output(CONTENT_FILE))?;
    ensure!(
        content.n_items() == split.n_items(),
        "content has {} items, split has {}",
        content.n_items(),
        split.n_items()
    );
    Ok(Prepared {
        split,
        content,
        digest: sha256_hex(&bytes),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub version: String,
    pub config_hash: String,
    pub split_digest: String,
    pub artifact_sha256: String,
    pub seeds: BTreeMap<String, u64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: Option<f64>,
    /// Wall time per phase.
    pub seconds: BTreeMap<String, f64>,
}

/// Pretrains the encoder on warm-item content, fits codes, and writes the
/// model artifact, loss trace and run manifest.
pub fn train(cfg: &RunConfig) -> Result<TrainManifest> {
    cfg.validate()?;
    let prepared = load_prepared(cfg)?;
    let (split, content) = (&prepared.split, &prepared.content);
    let warm = split.warm_items();
    let mut dae = DaeParams::new(
        content.dim(),
        &cfg.dae.hidden,
        cfg.hyper.r,
        cfg.dae.delta,
        cfg.dae.corruption,
        cfg.dae.init_seed,
    )?;
    let start = Instant::now();
    let warm_rows = content.vectors.select(Axis(0), &warm);
    let pre_trace = pretrain(&mut dae, warm_rows.view(), &cfg.dae.pretrain).context("pretraining")?;
    let pretrain_secs = start.elapsed().as_secs_f64();
    if let Some(last) = pre_trace.last() {
        log::info!("pretrain: {} epochs, final loss {last:.6}", pre_trace.len());
    }

    let (out, items) = fit_excluding(
        &split.train,
        content.vectors.view(),
        &split.cold_items,
        &dae,
        &cfg.hyper,
        &cfg.dae.finetune,
    )
    .context("fitting codes")?;

    let artifact = ModelArtifact {
        hyper: cfg.hyper.clone(),
        split_digest: prepared.digest.clone(),
        users: out.users(),
        items,
        dae: out.dae.clone(),
        loss_trace: out.loss_trace().to_vec(),
    };
    let bytes = artifact.to_bytes()?;
    write_atomic(&cfg.output(MODEL_FILE), &bytes)?;
    let mut trace = String::from("iteration,loss\n");
    for (it, loss) in out.loss_trace().iter().enumerate() {
        let _ = writeln!(trace, "{},{loss:e}", it + 1);
    }
    write_atomic(&cfg.output(TRACE_FILE), trace.as_bytes())?;

    let t = out.times;
    let seconds = [
        ("pretrain", pretrain_secs),
        ("initialize", t.initialize.as_secs_f64()),
        ("user_codes", t.user_codes.as_secs_f64()),
        ("item_codes", t.item_codes.as_secs_f64()),
        ("delegates", t.delegates.as_secs_f64()),
        ("finetune", t.finetune.as_secs_f64()),
        ("loss", t.loss.as_secs_f64()),
    ];
    let seeds = [
        ("split", cfg.split.seed),
        ("solver", cfg.hyper.seed),
        ("dae_init", cfg.dae.init_seed),
        ("pretrain", cfg.dae.pretrain.seed),
        ("finetune", cfg.dae.finetune.seed),
    ];
    let manifest = TrainManifest {
        version: VERSION.into(),
        config_hash: cfg.hash()?,
        split_digest: prepared.digest,
        artifact_sha256: sha256_hex(&bytes),
        seeds: seeds.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        iterations: out.iterations,
        converged: out.converged,
        final_loss: out.loss_trace().last().copied(),
        seconds: seconds.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    };
    write_json(&cfg.output("train_manifest.json"), &manifest)?;
    log::info!(
        "train: {} iterations (converged: {}), artifact {}",
        out.iterations,
        out.converged,
        &manifest.artifact_sha256[..12]
    );
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub reports: EvalReports,
    /// Held-out sampled AUC, ties counted as misordered.
    pub sparse_auc: Option<f64>,
    /// Same sample with ties worth one half.
    pub sparse_auc_tie_half: Option<f64>,
}

pub const AUC_SAMPLES: usize = 20_000;

pub fn load_artifact(cfg: &RunConfig) -> Result<ModelArtifact> {
    let path = cfg.output(MODEL_FILE);
    ModelArtifact::from_bytes(&read(&path)?).with_context(|| format!("loading {}", path.display()))
}

/// Scores the sparse and cold test sets and writes JSON and CSV reports.
pub fn eval(cfg: &RunConfig) -> Result<EvalSummary> {
    let prepared = load_prepared(cfg)?;
    let artifact = load_artifact(cfg)?;
    if artifact.split_digest != prepared.digest {
        bail!(
            "model was trained on split {} but {} has digest {}",
            artifact.split_digest,
            SPLIT_FILE,
            prepared.digest
        );
    }
    let split = &prepared.split;
    let reports = evaluate(
        split,
        &artifact.users,
        &artifact.items,
        &artifact.dae,
        prepared.content.vectors.view(),
        &cfg.eval,
    )?;
    let auc = |credit| {
        heldout_auc(
            &split.train,
            &split.test_sparse,
            &artifact.users,
            &artifact.items,
            AUC_SAMPLES,
            cfg.eval.seed,
            credit,
        )
        .ok()
    };
    let summary = EvalSummary {
        sparse_auc: auc(0.0),
        sparse_auc_tie_half: auc(0.5),
        reports,
    };
    write_json(&cfg.output(REPORT_JSON), &summary)?;
    let mut csv = Vec::new();
    summary.reports.write_csv(&mut csv)?;
    write_atomic(&cfg.output(REPORT_CSV), &csv)?;
    for r in [&summary.reports.sparse, &summary.reports.cold] {
        log::info!(
            "eval {}: {} cases, Accuracy@10 {:.4}, MRR {:.4}",
            r.tag.as_str(),
            r.n_test_cases,
            r.accuracy(10.min(cfg.eval.k_max)),
            r.mrr
        );
    }
    Ok(summary)
}

pub fn bench(cfg: &RunConfig) -> Result<BenchReport> {
    let report = bench_retrieval(&cfg.bench)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_atomic(&cfg.output(BENCH_FILE), &csv)?;
    ensure!(report.rankings_match, "Hamming and float rankings disagree on sign features");
    Ok(report)
}

pub fn synth(params: &SynthParams, dir: &std::path::Path) -> Result<()> {
    let corpus = params.generate()?;
    corpus.write(dir)?;
    log::info!(
        "synth: {} positives over {} users and {} items in {}",
        corpus.pairs.len(),
        params.n_users,
        params.n_items,
        dir.display()
    );
    Ok(())
}
