//! Error metrics, fold aggregation, confusion matrices and report tables.

mod confusion;
mod metrics;
mod report;
mod tables;

pub use confusion::{confusion_matrix, ConfusionMatrix};
pub use metrics::{aggregate_folds, mae, mdae, mse, AggregateMetrics, MeanStd, MetricSet};
pub use report::{EvalReport, FoldRecord};
pub use tables::{emit_tables, TableMode};
