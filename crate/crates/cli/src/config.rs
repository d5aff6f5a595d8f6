use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dph_core::dae::TrainConfig;
use dph_core::data::SplitSpec;
use dph_core::model::HyperParams;
use dph_core::retrieval::{BenchConfig, EvalSettings};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub interactions: PathBuf,
    pub documents: PathBuf,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            interactions: "interactions.csv".into(),
            documents: "documents.jsonl".into(),
            output: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub vocab_cap: usize,
    pub stem: bool,
    /// Which repetition of the split to prepare.
    pub rep_index: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            vocab_cap: 2000,
            stem: false,
            rep_index: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaeConfig {
    /// Hidden widths between the vocabulary and the code layer.
    pub hidden: Vec<usize>,
    pub delta: f64,
    pub corruption: f64,
    pub init_seed: u64,
    pub pretrain: TrainConfig,
    /// Per outer iteration.
    pub finetune: TrainConfig,
}

impl Default for DaeConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            delta: 1e-4,
            corruption: 0.1,
            init_seed: 0,
            pretrain: TrainConfig {
                epochs: 30,
                ..TrainConfig::default()
            },
            finetune: TrainConfig {
                epochs: 2,
                ..TrainConfig::default()
            },
        }
    }
}

/// Everything a run needs. Unset fields take desk-scale defaults; the
/// hyperparameters and evaluation protocol default to the published values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub data: DataConfig,
    pub split: SplitSpec,
    pub hyper: HyperParams,
    pub dae: DaeConfig,
    pub eval: EvalSettings,
    pub bench: BenchConfig,
}

impl RunConfig {
    /// Reads a TOML config; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.paths.interactions,
            &mut cfg.paths.documents,
            &mut cfg.paths.output,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// The published layer structure, code length and vocabulary size.
    pub fn paper_scale(mut self) -> Self {
        self.hyper.r = 30;
        self.dae.hidden = vec![200];
        self.data.vocab_cap = 8000;
        self.hyper.alpha = 1e-5;
        self.hyper.beta = 1e-3;
        self.hyper.lambda = 20.0;
        self.hyper.outer_iters = 50;
        self.eval.n_negatives = 1000;
        self
    }

    /// One seed for every random stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.split.seed = seed;
        self.hyper.seed = seed;
        self.dae.init_seed = seed;
        self.dae.pretrain.seed = seed;
        self.dae.finetune.seed = seed;
        self.eval.seed = seed;
        self.bench.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.hyper.validate()?;
        self.dae.pretrain.validate()?;
        self.dae.finetune.validate()?;
        if self.data.vocab_cap == 0 {
            bail!("vocab_cap must be >= 1");
        }
        if self.dae.hidden.contains(&0) {
            bail!("hidden layer widths must be >= 1");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Hash of the canonical TOML rendering.
    pub fn hash(&self) -> Result<String> {
        Ok(crate::fsutil::sha256_hex(self.to_toml()?.as_bytes()))
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.paths.output.join(name)
    }
}
