//! Sentence vectors from per-layer token representations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::TransformerModel;
use super::wordpiece::{tokenize_wordpiece_truncated, CLS_ID, PAD_ID, SEP_ID};
use crate::error::{Error, Result};
use crate::numkernel::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerSelector {
    /// Second-to-last encoder layer.
    #[default]
    Penultimate,
    Last,
    /// Explicit index into the `L + 1` outputs; 0 is the embedding sum.
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Mean over real tokens, excluding `[PAD]`, `[CLS]` and `[SEP]`.
    #[default]
    Mean,
    /// The `[CLS]` vector of the selected layer.
    Cls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PoolingStrategy {
    pub layer: LayerSelector,
    pub reduction: Reduction,
}

impl PoolingStrategy {
    /// Index into the `encoder_layers + 1` outputs.
    pub fn layer_index(&self, encoder_layers: usize) -> Result<usize> {
        let idx = match self.layer {
            LayerSelector::Penultimate => encoder_layers.checked_sub(1),
            LayerSelector::Last => Some(encoder_layers),
            LayerSelector::Index(i) => Some(i),
        };
        match idx {
            Some(i) if i <= encoder_layers => Ok(i),
            _ => Err(Error::Config(format!(
                "layer {:?} is not valid for {encoder_layers} encoder layers",
                self.layer
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledVector {
    pub vector: Vec<f64>,
    /// No real token was present; `vector` is the `[CLS]` row.
    pub degenerate: bool,
}

/// Exact running mean of equally sized rows.
pub fn mean_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Option<Vec<f64>> {
    let mut mean: Option<Vec<f64>> = None;
    for (k, row) in rows.into_iter().enumerate() {
        match mean.as_mut() {
            None => mean = Some(row.to_vec()),
            Some(m) => {
                let inv = 1.0 / (k + 1) as f64;
                for (mv, &x) in m.iter_mut().zip(row) {
                    *mv += (x - *mv) * inv;
                }
            }
        }
    }
    mean
}

/// Reduces one layer of `layers` to a single vector. `ids` and `mask`
/// identify real tokens; the `[CLS]` row is assumed at position 0.
pub fn pool_sentence(layers: &[Tensor], ids: &[u32], mask: &[bool], strategy: &PoolingStrategy) -> Result<PooledVector> {
    if layers.is_empty() {
        return Err(Error::EmptyInput);
    }
    let layer = &layers[strategy.layer_index(layers.len() - 1)?];
    if layer.rows() != ids.len() || mask.len() != ids.len() {
        return Err(Error::LengthMismatch(layer.rows(), ids.len()));
    }
    if ids.is_empty() {
        return Err(Error::EmptyInput);
    }
    let cls = || PooledVector {
        vector: layer.row(0).to_vec(),
        degenerate: false,
    };
    match strategy.reduction {
        Reduction::Cls => Ok(cls()),
        Reduction::Mean => {
            let real = (0..ids.len())
                .filter(|&t| mask[t] && ![PAD_ID, CLS_ID, SEP_ID].contains(&ids[t]))
                .map(|t| layer.row(t));
            Ok(match mean_rows(real) {
                Some(vector) => PooledVector {
                    vector,
                    degenerate: false,
                },
                None => PooledVector {
                    degenerate: true,
                    ..cls()
                },
            })
        }
    }
}

impl TransformerModel {
    /// Tokenizes, truncates to the maximum length, encodes and pools.
    pub fn embed_text(&self, text: &str, strategy: &PoolingStrategy) -> Result<PooledVector> {
        let enc = tokenize_wordpiece_truncated(&self.vocab, text, None, self.config().max_seq_len)?;
        let mask = vec![true; enc.len()];
        let layers = self.encode_with_segments(&enc.ids, &enc.segments, &mask)?;
        pool_sentence(&layers, &enc.ids, &mask, strategy)
    }

    /// [`Self::embed_text`] over many texts, in input order.
    pub fn embed_texts(&self, texts: &[String], strategy: &PoolingStrategy) -> Result<Vec<PooledVector>> {
        texts.par_iter().map(|t| self.embed_text(t, strategy)).collect()
    }
}
