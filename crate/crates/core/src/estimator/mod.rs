//! Effort estimation heads over embedding-based requirement representations.

mod config;
mod experiment;
mod model;
mod source;
mod train;

pub use config::{HeadConfig, InputMode, OutputKind};
pub use experiment::{represent_corpus, run_experiment, ExperimentId, ExperimentOptions};
pub use model::{
    argmax_lowest, build_estimator, prediction_from_raw, EstimatorModel, PredictionResult, Representation,
    SourceDescriptor, SourceKind, MAX_EFFORT, MIN_EFFORT,
};
pub use source::{ContextualSource, RepresentationSource, StaticSource};
pub use train::{evaluate_mae, train_estimator, Sample, StopReason, TrainHistory};
