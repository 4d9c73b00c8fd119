//! Flat `key = value` pipeline configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use se3m::corpus::{Cleaner, Stopwords};
use se3m::embed_ctx::{PretrainConfig, PretrainDataConfig, TransformerConfig};
use se3m::embed_static::{StaticMode, StaticTrainConfig};
use se3m::estimator::{ExperimentId, HeadConfig};

pub const DATA_DIR_ENV: &str = "SE3M_DATA_DIR";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub data_dir: PathBuf,
    pub labeled: PathBuf,
    /// Unlabeled documents for base pretraining; the labeled texts when unset.
    pub pretrain_corpus: Option<PathBuf>,
    pub finetune_corpus: PathBuf,
    pub out: PathBuf,
    pub model_dir: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
    pub experiment: ExperimentId,
    pub kfold: usize,
    pub by_project: bool,
    pub seed: u64,
    /// `english`, `none` or a path to a one-word-per-line list.
    pub stopwords: String,
    pub static_train: StaticTrainConfig,
    pub static_finetune_epochs: usize,
    pub transformer: TransformerConfig,
    pub pretrain: PretrainConfig,
    pub pretrain_data: PretrainDataConfig,
    pub ctx_finetune_epochs: usize,
    pub head: HeadConfig,
    pub validation_fraction: f64,
    pub save_fold_models: bool,
}

impl PipelineConfig {
    /// Defaults, with the data directory taken from the environment.
    pub fn new() -> Self {
        let data_dir = std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
        Self {
            labeled: PathBuf::from("labeled.csv"),
            pretrain_corpus: None,
            finetune_corpus: PathBuf::from("finetune.txt"),
            data_dir,
            out: PathBuf::from("run"),
            model_dir: None,
            report_dir: None,
            experiment: ExperimentId::E1,
            kfold: 10,
            by_project: false,
            seed: 1,
            stopwords: "english".into(),
            static_train: StaticTrainConfig::default(),
            static_finetune_epochs: 5,
            transformer: TransformerConfig::default(),
            pretrain: PretrainConfig::default(),
            pretrain_data: PretrainDataConfig::default(),
            ctx_finetune_epochs: 1,
            head: HeadConfig::default(),
            validation_fraction: 0.1,
            save_fold_models: false,
        }
    }

    /// Applies every `key = value` line of `text`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
            self.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| anyhow!("`{key}` has invalid value `{value}`"))
        }
        fn flag(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => bail!("`{key}` expects true or false, got `{value}`"),
            }
        }
        match key {
            "data_dir" => self.data_dir = value.into(),
            "labeled" => self.labeled = value.into(),
            "pretrain_corpus" => self.pretrain_corpus = Some(value.into()),
            "finetune_corpus" => self.finetune_corpus = value.into(),
            "out" => self.out = value.into(),
            "model_dir" => self.model_dir = Some(value.into()),
            "report_dir" => self.report_dir = Some(value.into()),
            "experiment" => self.experiment = value.parse()?,
            "kfold" => self.kfold = num(key, value)?,
            "by_project" => self.by_project = flag(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "stopwords" => self.stopwords = value.into(),
            "validation_fraction" => self.validation_fraction = num(key, value)?,
            "save_fold_models" => self.save_fold_models = flag(key, value)?,
            "static.mode" => {
                self.static_train.mode = match value {
                    "cbow" => StaticMode::Cbow,
                    "skipgram" => StaticMode::Skipgram,
                    _ => bail!("`static.mode` expects cbow or skipgram, got `{value}`"),
                }
            }
            "static.dimension" => self.static_train.dimension = num(key, value)?,
            "static.window" => self.static_train.window = num(key, value)?,
            "static.negatives" => self.static_train.negatives = num(key, value)?,
            "static.epochs" => self.static_train.epochs = num(key, value)?,
            "static.learning_rate" => self.static_train.learning_rate = num(key, value)?,
            "static.min_count" => self.static_train.min_count = num(key, value)?,
            "static.finetune_epochs" => self.static_finetune_epochs = num(key, value)?,
            "ctx.layers" => self.transformer.layers = num(key, value)?,
            "ctx.hidden" => self.transformer.hidden = num(key, value)?,
            "ctx.heads" => self.transformer.heads = num(key, value)?,
            "ctx.intermediate" => self.transformer.intermediate = num(key, value)?,
            "ctx.max_seq_len" => {
                self.transformer.max_seq_len = num(key, value)?;
                self.pretrain_data.max_seq_len = self.transformer.max_seq_len;
            }
            "ctx.vocab_size" => self.transformer.vocab_size = num(key, value)?,
            "ctx.dropout" => self.transformer.dropout = num(key, value)?,
            "ctx.epochs" => self.pretrain.epochs = num(key, value)?,
            "ctx.batch_size" => self.pretrain.batch_size = num(key, value)?,
            "ctx.learning_rate" => self.pretrain.learning_rate = num(key, value)?,
            "ctx.clip_norm" => self.pretrain.clip_norm = num(key, value)?,
            "ctx.mask_rate" => self.pretrain_data.mask_rate = num(key, value)?,
            "ctx.dupe_factor" => self.pretrain_data.dupe_factor = num(key, value)?,
            "ctx.finetune_epochs" => self.ctx_finetune_epochs = num(key, value)?,
            "head.mode" => self.head.input = value.parse()?,
            "head.lstm_hidden" => self.head.lstm_hidden = num(key, value)?,
            "head.dense" => {
                self.head.dense = value
                    .split(',')
                    .map(|v| num(key, v.trim()))
                    .collect::<Result<_>>()?
            }
            "head.epochs" => self.head.epochs = num(key, value)?,
            "head.batch_size" => self.head.batch_size = num(key, value)?,
            "head.patience" => self.head.patience = num(key, value)?,
            "head.min_delta" => self.head.min_delta = num(key, value)?,
            "head.learning_rate" => self.head.learning_rate = num(key, value)?,
            _ => bail!("unknown configuration key `{key}`"),
        }
        Ok(())
    }

    /// Pushes the shared seed into every component.
    pub fn finish(&mut self) {
        self.static_train.seed = self.seed;
        self.transformer.seed = self.seed;
        self.pretrain.seed = self.seed;
        self.pretrain_data.seed = self.seed;
        self.head.seed = self.seed;
    }

    fn in_data_dir(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.data_dir.join(path)
        }
    }

    pub fn labeled_path(&self) -> PathBuf {
        self.in_data_dir(&self.labeled)
    }

    pub fn pretrain_path(&self) -> Option<PathBuf> {
        self.pretrain_corpus.as_deref().map(|p| self.in_data_dir(p))
    }

    pub fn finetune_path(&self) -> PathBuf {
        self.in_data_dir(&self.finetune_corpus)
    }

    pub fn models(&self) -> PathBuf {
        self.model_dir.clone().unwrap_or_else(|| self.out.join("models"))
    }

    pub fn reports(&self) -> PathBuf {
        self.report_dir.clone().unwrap_or_else(|| self.out.join("reports"))
    }

    pub fn cleaner(&self) -> Result<Cleaner> {
        let stopwords = match self.stopwords.as_str() {
            "english" => Stopwords::english(),
            "none" => Stopwords::none(),
            path => {
                let text = std::fs::read_to_string(self.in_data_dir(Path::new(path)))
                    .with_context(|| format!("reading stopword list {path}"))?;
                Stopwords::parse(&text)
            }
        };
        Ok(Cleaner::new(stopwords))
    }

    /// Every key with its current value, for manifests.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("labeled", self.labeled_path().display().to_string());
        put("finetune_corpus", self.finetune_path().display().to_string());
        if let Some(p) = self.pretrain_path() {
            put("pretrain_corpus", p.display().to_string());
        }
        put("experiment", self.experiment.to_string());
        put("kfold", self.kfold.to_string());
        put("by_project", self.by_project.to_string());
        put("seed", self.seed.to_string());
        put("stopwords", self.stopwords.clone());
        put("validation_fraction", self.validation_fraction.to_string());
        put("static", serde_json::to_string(&self.static_train).unwrap_or_default());
        put("static.finetune_epochs", self.static_finetune_epochs.to_string());
        put("ctx", self.transformer.to_json());
        put("ctx.pretrain", serde_json::to_string(&self.pretrain).unwrap_or_default());
        put("ctx.data", serde_json::to_string(&self.pretrain_data).unwrap_or_default());
        put("ctx.finetune_epochs", self.ctx_finetune_epochs.to_string());
        put("head", self.head.to_json());
        m
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::new()
    }
}
