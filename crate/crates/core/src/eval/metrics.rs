//! Paired-sample error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn abs_errors(actual: &[f64], predicted: &[f64]) -> Result<Vec<f64>> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch(actual.len(), predicted.len()));
    }
    if actual.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).collect())
}

/// Mean absolute error.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    let e = abs_errors(actual, predicted)?;
    Ok(e.iter().sum::<f64>() / e.len() as f64)
}

/// Median absolute error; even counts average the two central values.
pub fn mdae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    let mut e = abs_errors(actual, predicted)?;
    e.sort_by(f64::total_cmp);
    let n = e.len();
    Ok(if n % 2 == 1 {
        e[n / 2]
    } else {
        (e[n / 2 - 1] + e[n / 2]) / 2.0
    })
}

/// Mean squared error and its square root.
pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<(f64, f64)> {
    let e = abs_errors(actual, predicted)?;
    let m = e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64;
    Ok((m, m.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mae: f64,
    pub mdae: f64,
    /// Unrooted mean of squared errors.
    pub mse: f64,
    pub rmse: f64,
    pub n: usize,
}

impl MetricSet {
    pub fn compute(actual: &[f64], predicted: &[f64]) -> Result<Self> {
        let (mse, rmse) = mse(actual, predicted)?;
        Ok(Self {
            mae: mae(actual, predicted)?,
            mdae: mdae(actual, predicted)?,
            mse,
            rmse,
            n: actual.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population (n-divisor) standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(Self { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub mae: MeanStd,
    pub mdae: MeanStd,
    pub mse: MeanStd,
    pub rmse: MeanStd,
    pub folds: usize,
}

/// Mean and population standard deviation of every metric across folds.
pub fn aggregate_folds(folds: &[MetricSet]) -> Result<AggregateMetrics> {
    let pick = |f: fn(&MetricSet) -> f64| MeanStd::of(&folds.iter().map(f).collect::<Vec<_>>());
    Ok(AggregateMetrics {
        mae: pick(|m| m.mae)?,
        mdae: pick(|m| m.mdae)?,
        mse: pick(|m| m.mse)?,
        rmse: pick(|m| m.rmse)?,
        folds: folds.len(),
    })
}
