//! Mean-reduced training losses with their gradients.

use serde::{Deserialize, Serialize};

use super::activation::softmax_in_place;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

pub enum Targets<'a> {
    Values(&'a Tensor),
    Classes(&'a [usize]),
}

/// Scalar loss plus its gradient with respect to the predictions (or logits).
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub gradient: Tensor,
}

/// Mean of squared differences over every element.
pub fn mse_loss(predictions: &Tensor, targets: &Tensor) -> Result<LossOutput> {
    predictions.expect_shape(targets.shape())?;
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = predictions.len() as f64;
    let mut gradient = Tensor::zeros(predictions.shape());
    let mut value = 0.0;
    for ((g, &p), &t) in gradient
        .data_mut()
        .iter_mut()
        .zip(predictions.data())
        .zip(targets.data())
    {
        let diff = p - t;
        value += diff * diff;
        *g = 2.0 * diff / n;
    }
    Ok(LossOutput {
        value: value / n,
        gradient,
    })
}

/// Softmax cross-entropy from logits `[B×C]`, averaged over rows.
pub fn cross_entropy_loss(logits: &Tensor, classes: &[usize]) -> Result<LossOutput> {
    let (batch, c) = (logits.rows(), logits.cols());
    if classes.len() != batch {
        return Err(Error::Shape(format!("{} targets for {batch} rows", classes.len())));
    }
    if batch == 0 {
        return Err(Error::EmptyInput);
    }
    let mut gradient = logits.clone();
    let mut value = 0.0;
    for (b, &class) in classes.iter().enumerate() {
        if class >= c {
            return Err(Error::ClassOutOfRange { index: class, classes: c });
        }
        let row = gradient.row_mut(b);
        softmax_in_place(row);
        value -= row[class].max(f64::MIN_POSITIVE).ln();
        row[class] -= 1.0;
        row.iter_mut().for_each(|g| *g /= batch as f64);
    }
    Ok(LossOutput {
        value: value / batch as f64,
        gradient,
    })
}

pub fn loss(kind: LossKind, predictions: &Tensor, targets: Targets<'_>) -> Result<LossOutput> {
    match (kind, targets) {
        (LossKind::Mse, Targets::Values(t)) => mse_loss(predictions, t),
        (LossKind::CrossEntropy, Targets::Classes(c)) => cross_entropy_loss(predictions, c),
        _ => Err(Error::Config("loss kind does not match target type".into())),
    }
}
