use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{TokenSequence, Vocabulary};
use crate::error::{Error, Result};
use crate::numkernel::{Checkpoint, ParamStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StaticMode {
    Cbow,
    Skipgram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticTrainConfig {
    pub mode: StaticMode,
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for StaticTrainConfig {
    fn default() -> Self {
        Self {
            mode: StaticMode::Cbow,
            dimension: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 1,
            seed: 1,
        }
    }
}

impl StaticTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 || self.window == 0 || self.negatives == 0 || self.min_count == 0 {
            return Err(Error::Config(
                "dimension, window, negatives and min_count must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Word vectors: an input matrix (the embeddings) and an output matrix used
/// only by the training objective. Both are `|V|×d`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticEmbeddingModel {
    pub(crate) vocab: Vocabulary,
    pub(crate) input: Tensor,
    pub(crate) output: Tensor,
    pub(crate) config: StaticTrainConfig,
}

/// Result of averaging a sentence's word vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSentence {
    pub vector: Vec<f64>,
    /// Out-of-vocabulary share of the non-pad tokens (1 for an empty sentence).
    pub oov_ratio: f64,
    pub degenerate: bool,
}

const VOCAB_SECTION: &str = "vocab";
const CONFIG_KEY: &str = "static_config";

impl StaticEmbeddingModel {
    pub fn new(vocab: Vocabulary, input: Tensor, output: Tensor, config: StaticTrainConfig) -> Result<Self> {
        let shape = [vocab.len(), config.dimension];
        input.expect_shape(&shape)?;
        output.expect_shape(&shape)?;
        if !input.is_finite() || !output.is_finite() {
            return Err(Error::NonFinite("embedding matrix".into()));
        }
        Ok(Self {
            vocab,
            input,
            output,
            config,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dimension(&self) -> usize {
        self.config.dimension
    }

    pub fn config(&self) -> &StaticTrainConfig {
        &self.config
    }

    pub fn input_vectors(&self) -> &Tensor {
        &self.input
    }

    pub fn output_vectors(&self) -> &Tensor {
        &self.output
    }

    /// Input-matrix row for an in-vocabulary token; `None` for unknown words
    /// and the pad/unknown specials.
    pub fn embed_word(&self, token: &str) -> Option<&[f64]> {
        let idx = self.vocab.get(token)?;
        if self.vocab.is_special(idx) {
            return None;
        }
        Some(self.input.row(idx))
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        Some(cosine(self.embed_word(a)?, self.embed_word(b)?))
    }

    /// Mean of the known word vectors; pads are ignored and unknown words
    /// skipped.
    pub fn mean_pool_sentence(&self, tokens: &TokenSequence) -> PooledSentence {
        let d = self.dimension();
        let mut mean = vec![0.0; d];
        let mut known = 0usize;
        let real = tokens.real_tokens();
        for tok in real {
            if let Some(v) = self.embed_word(tok) {
                known += 1;
                let k = known as f64;
                mean.iter_mut().zip(v).for_each(|(m, x)| *m += (x - *m) / k);
            }
        }
        if known == 0 {
            return PooledSentence {
                vector: vec![0.0; d],
                oov_ratio: 1.0,
                degenerate: true,
            };
        }
        PooledSentence {
            vector: mean,
            oov_ratio: (real.len() - known) as f64 / real.len() as f64,
            degenerate: false,
        }
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut params = ParamStore::new();
        params.add("input", self.input.clone());
        params.add("output", self.output.clone());
        Ok(Checkpoint::new(params)
            .with_section(VOCAB_SECTION, self.vocab.to_text().into_bytes())
            .with_metadata("model", "static")
            .with_metadata(CONFIG_KEY, serde_json::to_string(&self.config)?))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let vocab = Vocabulary::from_text(ckpt.section_text(VOCAB_SECTION)?)?;
        let config: StaticTrainConfig = serde_json::from_str(
            ckpt.metadata
                .get(CONFIG_KEY)
                .ok_or_else(|| Error::Checkpoint("missing static config".into()))?,
        )?;
        let get = |name: &str| {
            ckpt.params
                .find(name)
                .map(|id| ckpt.params.get(id).clone())
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{name}`")))
        };
        Self::new(vocab, get("input")?, get("output")?, config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize_words, truncate_pad, PAD_TOKEN, UNK_TOKEN};
    use proptest::prelude::*;

    fn toy(vectors: &[(&str, Vec<f64>)]) -> StaticEmbeddingModel {
        let d = vectors[0].1.len();
        let vocab = Vocabulary::from_entries(vectors.iter().map(|(t, _)| (t.to_string(), 1))).unwrap();
        let mut rows = vec![vec![0.0; d], vec![0.0; d]];
        rows.extend(vectors.iter().map(|(_, v)| v.clone()));
        let input = Tensor::from_rows(&rows).unwrap();
        let output = Tensor::zeros(input.shape());
        let config = StaticTrainConfig {
            dimension: d,
            ..Default::default()
        };
        StaticEmbeddingModel::new(vocab, input, output, config).unwrap()
    }

    #[test]
    fn embed_known_unknown_and_specials() {
        let m = toy(&[("db", vec![1.0, 2.0])]);
        assert_eq!(m.embed_word("db"), Some(&[1.0, 2.0][..]));
        assert_eq!(m.embed_word("nope"), None);
        assert_eq!(m.embed_word(PAD_TOKEN), None);
        assert_eq!(m.embed_word(UNK_TOKEN), None);
    }

    #[test]
    fn mean_of_two_vectors() {
        let m = toy(&[("a", vec![1.0, 2.0]), ("b", vec![3.0, 4.0])]);
        let p = m.mean_pool_sentence(&tokenize_words("a b"));
        assert_eq!(p.vector, vec![2.0, 3.0]);
        assert_eq!(p.oov_ratio, 0.0);
        assert!(!p.degenerate);
    }

    #[test]
    fn repeated_word_is_exact() {
        let m = toy(&[("a", vec![0.1, -0.7, 0.3])]);
        let p = m.mean_pool_sentence(&truncate_pad(&tokenize_words("a a a"), 10));
        assert_eq!(p.vector, vec![0.1, -0.7, 0.3]);
    }

    #[test]
    fn all_oov_is_degenerate() {
        let m = toy(&[("a", vec![1.0, 1.0])]);
        let p = m.mean_pool_sentence(&tokenize_words("x y"));
        assert_eq!(p.vector, vec![0.0, 0.0]);
        assert_eq!(p.oov_ratio, 1.0);
        assert!(p.degenerate);
        let p = m.mean_pool_sentence(&tokenize_words("a x"));
        assert_eq!(p.oov_ratio, 0.5);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = toy(&[("a", vec![1.0, 1.0]), ("b", vec![0.5, -1.0])]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w2v.ckpt");
        m.save(&path).unwrap();
        assert_eq!(StaticEmbeddingModel::load(&path).unwrap(), m);
    }

    proptest! {
        #[test]
        fn pooling_permutation_and_scaling(
            vals in proptest::collection::vec(-5.0f64..5.0, 12),
            order in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
            lambda in -3.0f64..3.0,
        ) {
            let names = ["a", "b", "c", "d", "e", "f"];
            let vecs: Vec<(&str, Vec<f64>)> = names.iter().enumerate().map(|(i, n)| (*n, vals[2*i..2*i+2].to_vec())).collect();
            let m = toy(&vecs);
            let text: Vec<&str> = names.to_vec();
            let shuffled: Vec<&str> = order.iter().map(|&i| names[i]).collect();
            let p1 = m.mean_pool_sentence(&tokenize_words(&text.join(" ")));
            let p2 = m.mean_pool_sentence(&tokenize_words(&shuffled.join(" ")));
            for (a, b) in p1.vector.iter().zip(&p2.vector) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let scaled: Vec<(&str, Vec<f64>)> = vecs.iter().map(|(n, v)| (*n, v.iter().map(|x| x * lambda).collect())).collect();
            let p3 = toy(&scaled).mean_pool_sentence(&tokenize_words(&text.join(" ")));
            for (a, b) in p1.vector.iter().zip(&p3.vector) {
                prop_assert!((a * lambda - b).abs() < 1e-9);
            }
        }
    }
}
