//! Encoder hyperparameters and their JSON file form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub intermediate: usize,
    pub max_seq_len: usize,
    pub vocab_size: usize,
    /// Applied while training only; encoding is always dropout-free.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TransformerConfig {
    /// Desk-scale encoder: 4 layers, width 128, 4 heads.
    fn default() -> Self {
        Self {
            layers: 4,
            hidden: 128,
            heads: 4,
            intermediate: 512,
            max_seq_len: 100,
            vocab_size: 8000,
            dropout: 0.1,
            seed: 1,
        }
    }
}

impl TransformerConfig {
    /// The 12-layer, 768-wide, 12-head base shape.
    pub fn base(vocab_size: usize) -> Self {
        Self {
            layers: 12,
            hidden: 768,
            heads: 12,
            intermediate: 3072,
            vocab_size,
            ..Self::default()
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.layers == 0 || self.hidden == 0 || self.heads == 0 || self.intermediate == 0 {
            return fail("layers, hidden, heads and intermediate must be positive".into());
        }
        if self.hidden % self.heads != 0 {
            return fail(format!("hidden size {} is not divisible by {} heads", self.hidden, self.heads));
        }
        if self.max_seq_len < 2 {
            return fail("max sequence length must be at least 2".into());
        }
        if self.vocab_size < super::wordpiece::SPECIALS.len() {
            return fail(format!("vocabulary size {} cannot hold the specials", self.vocab_size));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
