//! Joint masked-token and next-sentence training.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Encoder, ExampleLoss, TransformerModel};
use super::pretrain_data::{create_pretraining_data, PretrainDataConfig, PretrainExample};
use crate::corpus::UnlabeledCorpus;
use crate::error::{Error, Result};
use crate::numkernel::{adam_update, AdamConfig, AdamState, Gradients, ParamStore};
use crate::rng::RngStream;

/// Examples per work unit. Units are reduced in a fixed order, so results do
/// not depend on the number of threads.
const CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            epochs: 1,
            learning_rate: 1e-3,
            clip_norm: 1.0,
            seed: 1,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.clip_norm < 0.0 {
            return Err(Error::Config("clip norm must be non-negative".into()));
        }
        Ok(())
    }
}

/// Mean objective values over a set of examples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    /// Mean cross-entropy per masked position.
    pub mlm: f64,
    /// Mean next-sentence cross-entropy per example.
    pub nsp: f64,
    pub mlm_accuracy: f64,
    pub nsp_accuracy: f64,
}

impl EpochLoss {
    fn from_parts(parts: &[ExampleLoss]) -> Self {
        let masked: usize = parts.iter().map(|p| p.mlm_count).sum();
        let n = parts.len().max(1) as f64;
        Self {
            mlm: parts.iter().map(|p| p.mlm_sum).sum::<f64>() / masked.max(1) as f64,
            nsp: parts.iter().map(|p| p.nsp).sum::<f64>() / n,
            mlm_accuracy: parts.iter().map(|p| p.mlm_correct).sum::<usize>() as f64 / masked.max(1) as f64,
            nsp_accuracy: parts.iter().filter(|p| p.nsp_correct).count() as f64 / n,
        }
    }
}

/// Losses before training (dropout off) and per epoch (training mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub initial: EpochLoss,
    pub epochs: Vec<EpochLoss>,
}

fn check_examples(encoder: &Encoder, examples: &[PretrainExample]) -> Result<()> {
    if examples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let max = encoder.config().max_seq_len;
    if let Some(ex) = examples.iter().find(|e| e.len() > max) {
        return Err(Error::SequenceTooLong { len: ex.len(), max });
    }
    Ok(())
}

/// Dropout-free objective values on `examples`.
pub fn evaluate_pretraining(model: &TransformerModel, examples: &[PretrainExample]) -> Result<EpochLoss> {
    check_examples(&model.encoder, examples)?;
    let parts = examples
        .par_iter()
        .map(|ex| model.encoder.example_loss(&model.params, ex, None, None))
        .collect::<Result<Vec<_>>>()?;
    Ok(EpochLoss::from_parts(&parts))
}

fn batch_gradients(
    encoder: &Encoder,
    params: &ParamStore,
    batch: &[(usize, &PretrainExample)],
    rng: &RngStream,
) -> Result<(Gradients, Vec<ExampleLoss>)> {
    let masked: usize = batch.iter().map(|(_, e)| e.masked_positions.len()).sum();
    let mlm_weight = if masked == 0 { 0.0 } else { 1.0 / masked as f64 };
    let nsp_weight = 1.0 / batch.len() as f64;
    let units = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = params.zero_grads();
            let mut parts = Vec::with_capacity(chunk.len());
            for &(index, ex) in chunk {
                let mut ex_rng = rng.derive(index as u64);
                let loss = encoder.example_loss(params, ex, Some(&mut ex_rng), Some((&mut g, mlm_weight, nsp_weight)))?;
                parts.push(loss);
            }
            Ok((g, parts))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut units = units.into_iter();
    let (mut total, mut parts) = units.next().expect("non-empty batch");
    for (g, p) in units {
        total.accumulate(&g)?;
        parts.extend(p);
    }
    Ok((total, parts))
}

/// Trains on `examples` for `config.epochs` epochs with Adam and calls
/// `on_epoch` after each one.
pub fn pretrain_with(
    model: &mut TransformerModel,
    examples: &[PretrainExample],
    config: &PretrainConfig,
    mut on_epoch: impl FnMut(usize, &EpochLoss),
) -> Result<LossHistory> {
    config.validate()?;
    let initial = evaluate_pretraining(model, examples)?;
    let mut history = LossHistory {
        initial,
        epochs: Vec::with_capacity(config.epochs),
    };
    let mut adam = AdamState::new(AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    });
    let root = RngStream::new(config.seed);
    for epoch in 0..config.epochs {
        let epoch_rng = root.derive(epoch as u64);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        epoch_rng.derive(u64::MAX).shuffle(&mut order);
        let mut parts = Vec::with_capacity(examples.len());
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(usize, &PretrainExample)> = batch.iter().map(|&i| (i, &examples[i])).collect();
            let (mut grads, p) = batch_gradients(&model.encoder, &model.params, &batch, &epoch_rng.derive(b as u64))?;
            let norm = grads.norm();
            if !norm.is_finite() {
                return Err(Error::NonFinite(format!("gradient at epoch {epoch}, batch {b}")));
            }
            if config.clip_norm > 0.0 && norm > config.clip_norm {
                grads.scale(config.clip_norm / norm);
            }
            adam_update(&mut model.params, &grads, &mut adam)?;
            parts.extend(p);
        }
        let loss = EpochLoss::from_parts(&parts);
        on_epoch(epoch, &loss);
        history.epochs.push(loss);
    }
    Ok(history)
}

pub fn pretrain(
    model: &mut TransformerModel,
    examples: &[PretrainExample],
    config: &PretrainConfig,
) -> Result<LossHistory> {
    pretrain_with(model, examples, config, |_, _| {})
}

/// Continues training on examples drawn from `domain` with the model's own
/// vocabulary. Zero epochs leave the model untouched.
pub fn finetune_lm(
    model: &mut TransformerModel,
    domain: &UnlabeledCorpus,
    data: &PretrainDataConfig,
    config: &PretrainConfig,
) -> Result<LossHistory> {
    if domain.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let data = PretrainDataConfig {
        max_seq_len: data.max_seq_len.min(model.config().max_seq_len),
        ..data.clone()
    };
    let examples = create_pretraining_data(domain, &model.vocab, &data)?;
    pretrain(model, &examples, config)
}
