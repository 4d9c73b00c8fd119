//! Context-less word embeddings trained with negative sampling.

mod model;
mod train;

pub use model::{cosine, PooledSentence, StaticEmbeddingModel, StaticMode, StaticTrainConfig};
pub use train::{
    finetune_static, negative_sampling_loss, sample_probe_pairs, train_static, train_static_with, NoiseTable,
    ProbePair,
};
