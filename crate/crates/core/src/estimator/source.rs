//! Turning requirement text into estimator inputs.

use super::config::InputMode;
use super::model::{Representation, SourceDescriptor, SourceKind};
use crate::corpus::{tokenize_words, truncate_pad, DEFAULT_MAX_LEN};
use crate::embed_ctx::{
    pool_sentence, tokenize_wordpiece_truncated, PoolingStrategy, Reduction, TransformerModel, CLS_ID, PAD_ID, SEP_ID,
};
use crate::embed_static::StaticEmbeddingModel;
use crate::error::Result;
use crate::numkernel::{sha256_hex, Tensor};

/// An embedding model that can represent requirement text.
pub trait RepresentationSource: Send + Sync {
    fn descriptor(&self) -> SourceDescriptor;

    fn dimension(&self) -> usize;

    /// The representation of `text` and whether it is degenerate (no known
    /// token contributed).
    fn represent(&self, text: &str, mode: InputMode) -> Result<(Representation, bool)>;
}

/// Word vectors: unknown words are skipped, at most `max_len` words are read.
#[derive(Debug, Clone)]
pub struct StaticSource {
    model: StaticEmbeddingModel,
    fine_tuned: bool,
    identity: String,
    pub max_len: usize,
}

impl StaticSource {
    pub fn new(model: StaticEmbeddingModel, fine_tuned: bool) -> Result<Self> {
        let identity = sha256_hex(&model.to_checkpoint()?.to_bytes()?);
        Ok(Self {
            model,
            fine_tuned,
            identity,
            max_len: DEFAULT_MAX_LEN,
        })
    }

    pub fn model(&self) -> &StaticEmbeddingModel {
        &self.model
    }
}

impl RepresentationSource for StaticSource {
    fn descriptor(&self) -> SourceDescriptor {
        SourceDescriptor {
            kind: SourceKind::Static,
            fine_tuned: self.fine_tuned,
            identity: self.identity.clone(),
            pooling: "word-mean".into(),
        }
    }

    fn dimension(&self) -> usize {
        self.model.dimension()
    }

    fn represent(&self, text: &str, mode: InputMode) -> Result<(Representation, bool)> {
        let tokens = truncate_pad(&tokenize_words(text), self.max_len);
        match mode {
            InputMode::Pooled => {
                let pooled = self.model.mean_pool_sentence(&tokens);
                Ok((Representation::Pooled(pooled.vector), pooled.degenerate))
            }
            InputMode::Sequence => {
                let rows: Vec<Vec<f64>> = tokens
                    .real_tokens()
                    .iter()
                    .filter_map(|t| self.model.embed_word(t).map(<[f64]>::to_vec))
                    .collect();
                if rows.is_empty() {
                    let zero = Tensor::zeros(&[1, self.dimension()]);
                    return Ok((Representation::Sequence(zero), true));
                }
                Ok((Representation::Sequence(Tensor::from_rows(&rows)?), false))
            }
        }
    }
}

/// Token states of one encoder layer, or their pooled summary.
#[derive(Debug, Clone)]
pub struct ContextualSource {
    model: TransformerModel,
    fine_tuned: bool,
    identity: String,
    pub strategy: PoolingStrategy,
}

impl ContextualSource {
    pub fn new(model: TransformerModel, fine_tuned: bool) -> Result<Self> {
        let identity = sha256_hex(&model.to_checkpoint().to_bytes()?);
        Ok(Self {
            model,
            fine_tuned,
            identity,
            strategy: PoolingStrategy::default(),
        })
    }

    pub fn model(&self) -> &TransformerModel {
        &self.model
    }
}

impl RepresentationSource for ContextualSource {
    fn descriptor(&self) -> SourceDescriptor {
        let reduction = match self.strategy.reduction {
            Reduction::Mean => "mean",
            Reduction::Cls => "cls",
        };
        SourceDescriptor {
            kind: SourceKind::Contextual,
            fine_tuned: self.fine_tuned,
            identity: self.identity.clone(),
            pooling: format!("{:?}-{reduction}", self.strategy.layer).to_lowercase(),
        }
    }

    fn dimension(&self) -> usize {
        self.model.config().hidden
    }

    fn represent(&self, text: &str, mode: InputMode) -> Result<(Representation, bool)> {
        let enc = tokenize_wordpiece_truncated(self.model.vocab(), text, None, self.model.config().max_seq_len)?;
        let mask = vec![true; enc.len()];
        let layers = self.model.encode_with_segments(&enc.ids, &enc.segments, &mask)?;
        match mode {
            InputMode::Pooled => {
                let pooled = pool_sentence(&layers, &enc.ids, &mask, &self.strategy)?;
                Ok((Representation::Pooled(pooled.vector), pooled.degenerate))
            }
            InputMode::Sequence => {
                let layer = &layers[self.strategy.layer_index(layers.len() - 1)?];
                let rows: Vec<Vec<f64>> = (0..enc.len())
                    .filter(|&t| ![PAD_ID, CLS_ID, SEP_ID].contains(&enc.ids[t]))
                    .map(|t| layer.row(t).to_vec())
                    .collect();
                if rows.is_empty() {
                    return Ok((Representation::Sequence(Tensor::from_rows(&[layer.row(0).to_vec()])?), true));
                }
                Ok((Representation::Sequence(Tensor::from_rows(&rows)?), false))
            }
        }
    }
}
