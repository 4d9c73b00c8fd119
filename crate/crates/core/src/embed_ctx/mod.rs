//! Contextual embeddings: WordPiece tokenization, masked-token and
//! next-sentence pretraining, and pooled sentence vectors from a
//! bidirectional transformer encoder.

mod config;
mod model;
mod pool;
mod pretrain_data;
mod train;
mod wordpiece;

pub use config::TransformerConfig;
pub use model::{Encoder, ExampleLoss, TransformerModel, INIT_STD};
pub use pool::{mean_rows, pool_sentence, LayerSelector, PooledVector, PoolingStrategy, Reduction};
pub use pretrain_data::{
    create_pretraining_data, mask_encoding, masking_stats, split_sentences, MaskingStats, PretrainDataConfig,
    PretrainExample,
};
pub use train::{evaluate_pretraining, finetune_lm, pretrain, pretrain_with, EpochLoss, LossHistory, PretrainConfig};
pub use wordpiece::{
    build_wordpiece_vocab, pre_tokenize, tokenize_wordpiece, tokenize_wordpiece_truncated, truncate_pair, Encoding,
    WordPieceVocab, CLS, CLS_ID, CONTINUATION, MASK, MASK_ID, PAD, PAD_ID, SEP, SEP_ID, SPECIALS, UNK, UNK_ID,
};
