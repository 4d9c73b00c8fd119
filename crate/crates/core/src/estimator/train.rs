//! Minibatch Adam training with early stopping on validation MAE.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::OutputKind;
use super::model::{EstimatorModel, Representation};
use crate::corpus::BucketScheme;
use crate::error::{Error, Result};
use crate::eval::mae;
use crate::numkernel::{adam_update, cross_entropy_loss, mse_loss, AdamConfig, AdamState, Gradients, Tensor};
use crate::rng::RngStream;

/// Samples per work unit. Units are reduced in a fixed order, so results do
/// not depend on the number of threads.
const CHUNK: usize = 16;

/// A representation paired with its story points.
pub type Sample<'a> = (&'a Representation, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Patience,
    EpochsExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean minibatch loss per epoch.
    pub train_loss: Vec<f64>,
    pub val_mae: Vec<f64>,
    /// Zero-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub stop_reason: StopReason,
}

fn check_samples(model: &EstimatorModel, samples: &[Sample<'_>], what: &str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Config(format!("{what} set is empty")));
    }
    for (rep, effort) in samples {
        model.check(rep)?;
        if !effort.is_finite() {
            return Err(Error::NonFinite(format!("{what} effort")));
        }
    }
    Ok(())
}

/// Mean loss over `batch` and its parameter gradients.
pub(crate) fn batch_gradients(model: &EstimatorModel, batch: &[Sample<'_>]) -> Result<(f64, Gradients)> {
    let scheme = BucketScheme::planning_poker();
    let total = batch.len() as f64;
    let units = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let reps: Vec<&Representation> = chunk.iter().map(|s| s.0).collect();
            let (out, cache) = model.forward(&model.params, &reps)?;
            let loss = match model.config().output {
                OutputKind::Linear => {
                    let targets = Tensor::from_vec(&[chunk.len(), 1], chunk.iter().map(|s| s.1).collect())?;
                    mse_loss(&out, &targets)?
                }
                OutputKind::Softmax => {
                    let classes = chunk
                        .iter()
                        .map(|s| scheme.nearest_index(s.1))
                        .collect::<Result<Vec<_>>>()?;
                    cross_entropy_loss(&out, &classes)?
                }
            };
            let weight = chunk.len() as f64 / total;
            let mut d_out = loss.gradient;
            d_out.scale(weight);
            let mut grads = model.params.zero_grads();
            model.backward(&model.params, &cache, &d_out, &mut grads)?;
            Ok((loss.value * weight, grads))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut units = units.into_iter();
    let (mut loss, mut grads) = units.next().ok_or(Error::EmptyInput)?;
    for (l, g) in units {
        loss += l;
        grads.accumulate(&g)?;
    }
    Ok((loss, grads))
}

/// MAE of the unclamped model outputs on `samples`. Softmax heads are scored
/// by the value of their predicted bucket.
pub fn evaluate_mae(model: &EstimatorModel, samples: &[Sample<'_>]) -> Result<f64> {
    let reps: Vec<Representation> = samples.iter().map(|s| s.0.clone()).collect();
    let predicted: Vec<f64> = model.predict_batch(&reps)?.into_iter().map(|p| p.raw).collect();
    let actual: Vec<f64> = samples.iter().map(|s| s.1).collect();
    mae(&actual, &predicted)
}

/// Trains `model` in place and keeps the parameters of the epoch with the
/// lowest validation MAE.
pub fn train_estimator(model: &mut EstimatorModel, train: &[Sample<'_>], val: &[Sample<'_>]) -> Result<TrainHistory> {
    let config = model.config().clone();
    config.validate()?;
    check_samples(model, train, "training")?;
    check_samples(model, val, "validation")?;
    let mut adam = AdamState::new(AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    });
    let root = RngStream::new(config.seed).derive(0x7472_6169_6e);
    let mut history = TrainHistory {
        train_loss: Vec::with_capacity(config.epochs),
        val_mae: Vec::with_capacity(config.epochs),
        best_epoch: 0,
        best_val_mae: f64::INFINITY,
        stop_reason: StopReason::EpochsExhausted,
    };
    let mut best_params = model.params.clone();
    let mut reference = f64::INFINITY;
    let mut stale = 0usize;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        root.derive(epoch as u64).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Sample<'_>> = chunk.iter().map(|&i| train[i]).collect();
            let (loss, grads) = batch_gradients(model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
            }
            adam_update(&mut model.params, &grads, &mut adam)?;
            loss_sum += loss;
            batches += 1;
        }
        history.train_loss.push(loss_sum / batches as f64);
        let val_mae = evaluate_mae(model, val)?;
        history.val_mae.push(val_mae);
        if val_mae < history.best_val_mae {
            history.best_val_mae = val_mae;
            history.best_epoch = epoch;
            best_params = model.params.clone();
        }
        if val_mae < reference - config.min_delta {
            reference = val_mae;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                history.stop_reason = StopReason::Patience;
                break;
            }
        }
    }
    model.params = best_params;
    Ok(history)
}
