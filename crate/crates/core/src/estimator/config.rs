//! Estimator head hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// One vector per token, read by an LSTM.
    #[default]
    Sequence,
    /// One vector per requirement; the LSTM is bypassed.
    Pooled,
}

impl std::fmt::Display for InputMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InputMode::Sequence => "sequence",
            InputMode::Pooled => "pooled",
        })
    }
}

impl std::str::FromStr for InputMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequence" => Ok(Self::Sequence),
            "pooled" => Ok(Self::Pooled),
            other => Err(Error::Config(format!("unknown input mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    /// Single linear unit regressing story points.
    #[default]
    Linear,
    /// Softmax over the Planning-Poker buckets.
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadConfig {
    pub input: InputMode,
    pub lstm_hidden: usize,
    pub dense: Vec<usize>,
    pub activation: Activation,
    pub output: OutputKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    /// Smallest validation-MAE drop that resets the patience counter.
    pub min_delta: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            input: InputMode::Sequence,
            lstm_hidden: 50,
            dense: vec![50, 10],
            activation: Activation::Relu,
            output: OutputKind::Linear,
            epochs: 20,
            batch_size: 128,
            patience: 5,
            min_delta: 1e-4,
            learning_rate: crate::numkernel::DEFAULT_LEARNING_RATE,
            seed: 1,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.dense.contains(&0) {
            return fail("dense sizes must be positive");
        }
        if self.input == InputMode::Sequence && self.lstm_hidden == 0 {
            return fail("lstm hidden size must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return fail("epochs and batch size must be positive");
        }
        if self.patience == 0 || self.patience > self.epochs {
            return fail("patience must be between 1 and the number of epochs");
        }
        if !(self.min_delta >= 0.0) {
            return fail("min_delta must be non-negative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be positive");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
