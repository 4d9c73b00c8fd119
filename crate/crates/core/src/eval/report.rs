//! Per-experiment evaluation reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use super::metrics::{aggregate_folds, AggregateMetrics, MetricSet};
use super::tables::{fmt2, fmt_raw, write_csv};
use crate::corpus::SplitKind;
use crate::error::{Error, Result};

/// Outcome of one train/test round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    /// Fold number or held-out project id.
    pub label: String,
    pub metrics: MetricSet,
    pub train_size: usize,
    pub validation_size: usize,
    pub best_epoch: usize,
    pub best_validation_mae: f64,
    /// Mean effort of the test records.
    pub effort_mean: f64,
    /// Population standard deviation of the test efforts.
    pub effort_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment: String,
    pub split: SplitKind,
    pub folds: Vec<FoldRecord>,
    pub aggregate: AggregateMetrics,
    /// Rows are actual buckets, columns predicted buckets.
    pub confusion: Option<ConfusionMatrix>,
    /// Seeds, configurations and model identities.
    pub provenance: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn new(
        experiment: &str,
        split: SplitKind,
        folds: Vec<FoldRecord>,
        confusion: Option<ConfusionMatrix>,
        provenance: BTreeMap<String, String>,
    ) -> Result<Self> {
        let aggregate = aggregate_folds(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>())?;
        Ok(Self {
            experiment: experiment.to_string(),
            split,
            folds,
            aggregate,
            confusion,
            provenance,
        })
    }

    /// Aggregate recomputed from the fold list.
    pub fn recompute_aggregate(&self) -> Result<AggregateMetrics> {
        aggregate_folds(&self.folds.iter().map(|f| f.metrics).collect::<Vec<_>>())
    }

    /// Label for comparison tables: the experiment id plus the embedding
    /// source when recorded.
    pub fn model_label(&self) -> String {
        match self.provenance.get("embedding") {
            Some(e) => format!("{} ({e})", self.experiment),
            None => self.experiment.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Writes `report.json`, `folds.csv`, `folds_raw.csv` and, when present,
    /// `confusion.csv` and `confusion_normalized.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json_path = dir.join("report.json");
        let json = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
        let header = ["fold", "n", "mae", "mdae", "mse", "rmse", "best_epoch", "best_validation_mae"];
        let rows = |fmt: fn(f64) -> String| -> Vec<Vec<String>> {
            let mut rows: Vec<Vec<String>> = self
                .folds
                .iter()
                .map(|f| {
                    vec![
                        f.label.clone(),
                        f.metrics.n.to_string(),
                        fmt(f.metrics.mae),
                        fmt(f.metrics.mdae),
                        fmt(f.metrics.mse),
                        fmt(f.metrics.rmse),
                        f.best_epoch.to_string(),
                        fmt(f.best_validation_mae),
                    ]
                })
                .collect();
            let a = &self.aggregate;
            for (name, pick) in [("mean", 0), ("pop_std", 1)] {
                let v = |m: &super::metrics::MeanStd| fmt(if pick == 0 { m.mean } else { m.std });
                rows.push(vec![
                    name.to_string(),
                    String::new(),
                    v(&a.mae),
                    v(&a.mdae),
                    v(&a.mse),
                    v(&a.rmse),
                    String::new(),
                    String::new(),
                ]);
            }
            rows
        };
        write_csv(&dir.join("folds.csv"), &header, &rows(fmt2))?;
        write_csv(&dir.join("folds_raw.csv"), &header, &rows(fmt_raw))?;
        if let Some(c) = &self.confusion {
            c.write(dir, "confusion")?;
        }
        Ok(())
    }
}
