//! Masked-language-model and next-sentence examples.

use serde::{Deserialize, Serialize};

use super::wordpiece::{truncate_pair, Encoding, WordPieceVocab, CLS_ID, MASK_ID, PAD_ID, SEP_ID, SPECIALS};
use crate::corpus::UnlabeledCorpus;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainDataConfig {
    pub mask_rate: f64,
    /// Share of selected positions replaced by `[MASK]`.
    pub mask_token_prob: f64,
    /// Share of selected positions replaced by a random piece.
    pub random_token_prob: f64,
    pub max_seq_len: usize,
    /// Passes over the corpus, each with fresh pairings and masks.
    pub dupe_factor: usize,
    pub seed: u64,
}

impl Default for PretrainDataConfig {
    fn default() -> Self {
        Self {
            mask_rate: 0.15,
            mask_token_prob: 0.8,
            random_token_prob: 0.1,
            max_seq_len: 100,
            dupe_factor: 1,
            seed: 1,
        }
    }
}

impl PretrainDataConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_rate > 0.0 && self.mask_rate < 1.0) {
            return Err(Error::Config(format!("mask rate must be in (0, 1), got {}", self.mask_rate)));
        }
        let replace = self.mask_token_prob + self.random_token_prob;
        if self.mask_token_prob < 0.0 || self.random_token_prob < 0.0 || replace > 1.0 {
            return Err(Error::Config("mask replacement shares must be non-negative and sum to at most 1".into()));
        }
        if self.max_seq_len < 4 {
            return Err(Error::Config("max sequence length must leave room for a sentence pair".into()));
        }
        if self.dupe_factor == 0 {
            return Err(Error::Config("dupe factor must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PretrainExample {
    pub ids: Vec<u32>,
    pub segments: Vec<u8>,
    /// Ascending positions whose original piece must be predicted.
    pub masked_positions: Vec<usize>,
    pub masked_labels: Vec<u32>,
    pub is_next: bool,
}

impl PretrainExample {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// NSP class: 0 for is-next, 1 for not-next.
    pub fn nsp_class(&self) -> usize {
        usize::from(!self.is_next)
    }

    /// Positions eligible for masking.
    pub fn maskable_count(&self) -> usize {
        self.ids.iter().filter(|&&i| is_maskable(i)).count()
    }
}

fn is_maskable(id: u32) -> bool {
    id != CLS_ID && id != SEP_ID && id != PAD_ID
}

/// Splits on newlines and on periods followed by whitespace or the end.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let mut current = String::new();
        let mut chars = line.chars().peekable();
        while let Some(c) = chars.next() {
            current.push(c);
            if c == '.' && chars.peek().is_none_or(|n| n.is_whitespace()) {
                push_trimmed(&mut out, &current);
                current.clear();
            }
        }
        push_trimmed(&mut out, &current);
    }
    out
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}

/// Replaces `round(rate × maskable)` positions: `[MASK]`, a random piece,
/// or left as is, in the configured shares.
pub fn mask_encoding(
    encoding: Encoding,
    vocab_size: usize,
    config: &PretrainDataConfig,
    rng: &mut RngStream,
) -> PretrainExample {
    let Encoding { mut ids, segments } = encoding;
    let mut candidates: Vec<usize> = (0..ids.len()).filter(|&p| is_maskable(ids[p])).collect();
    let k = (config.mask_rate * candidates.len() as f64).round() as usize;
    for i in 0..k {
        let j = i + rng.below(candidates.len() - i);
        candidates.swap(i, j);
    }
    let mut positions = candidates[..k].to_vec();
    positions.sort_unstable();
    let mut labels = Vec::with_capacity(k);
    let first_regular = SPECIALS.len();
    for &p in &positions {
        labels.push(ids[p]);
        let r = rng.next_f64();
        if r < config.mask_token_prob {
            ids[p] = MASK_ID;
        } else if r < config.mask_token_prob + config.random_token_prob && vocab_size > first_regular {
            ids[p] = (first_regular + rng.below(vocab_size - first_regular)) as u32;
        }
    }
    PretrainExample {
        ids,
        segments,
        masked_positions: positions,
        masked_labels: labels,
        is_next: false,
    }
}

/// Builds NSP pairs from adjacent sentences of each multi-sentence document.
/// Half take the true next sentence; the other half take a random sentence
/// of a different document. Every pair is then masked.
pub fn create_pretraining_data(
    corpus: &UnlabeledCorpus,
    vocab: &WordPieceVocab,
    config: &PretrainDataConfig,
) -> Result<Vec<PretrainExample>> {
    config.validate()?;
    let docs: Vec<Vec<Vec<u32>>> = corpus
        .documents()
        .iter()
        .map(|d| {
            split_sentences(d)
                .iter()
                .map(|s| vocab.split_text(s))
                .filter(|p| !p.is_empty())
                .collect::<Vec<_>>()
        })
        .filter(|d: &Vec<Vec<u32>>| !d.is_empty())
        .collect();
    if docs.len() < 2 {
        return Err(Error::TooFewDocuments(docs.len()));
    }
    let mut rng = RngStream::new(config.seed);
    let mut examples = Vec::new();
    for _ in 0..config.dupe_factor {
        for (d, doc) in docs.iter().enumerate() {
            for i in 0..doc.len().saturating_sub(1) {
                let mut a = doc[i].clone();
                let is_next = rng.bernoulli(0.5);
                let mut b = if is_next {
                    doc[i + 1].clone()
                } else {
                    let mut other = rng.below(docs.len() - 1);
                    if other >= d {
                        other += 1;
                    }
                    let sentences = &docs[other];
                    sentences[rng.below(sentences.len())].clone()
                };
                truncate_pair(&mut a, Some(&mut b), config.max_seq_len - 3);
                let mut ex = mask_encoding(Encoding::frame(&a, Some(&b)), vocab.len(), config, &mut rng);
                ex.is_next = is_next;
                examples.push(ex);
            }
        }
    }
    Ok(examples)
}

/// Aggregate statistics over generated examples.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskingStats {
    pub examples: usize,
    pub masked_fraction: f64,
    pub is_next_fraction: f64,
    pub masked_specials: usize,
}

pub fn masking_stats(examples: &[PretrainExample]) -> MaskingStats {
    let mut masked = 0usize;
    let mut maskable = 0usize;
    let mut specials = 0usize;
    for ex in examples {
        masked += ex.masked_positions.len();
        maskable += ex.maskable_count();
        specials += ex
            .masked_labels
            .iter()
            .filter(|&&l| !is_maskable(l))
            .count();
    }
    let n = examples.len().max(1) as f64;
    MaskingStats {
        examples: examples.len(),
        masked_fraction: masked as f64 / maskable.max(1) as f64,
        is_next_fraction: examples.iter().filter(|e| e.is_next).count() as f64 / n,
        masked_specials: specials,
    }
}
