//! Requirement corpora: ingest, cleaning, vocabularies, splits and buckets.

mod bucket;
mod clean;
mod record;
mod split;
mod stats;
mod tokens;
mod vocab;

pub use bucket::{bucketize, BucketScheme, PLANNING_POKER};
pub use clean::{clean_text, Cleaner, Stopwords};
pub use record::{
    load_labeled, load_unlabeled, IngestSummary, Ingested, LabeledCorpus, LabeledFormat, Rejection,
    RequirementRecord, UnlabeledCorpus, MAX_EFFORT,
};
pub use split::{holdout, kfold_indices, kfold_split, leave_one_project_out, Round, SplitKind, SplitPlan};
pub use stats::{corpus_stats, histogram, write_histogram_csv, Bin, CorpusStats, Moments};
pub use tokens::{tokenize_words, truncate_pad, TokenSequence, DEFAULT_MAX_LEN, PAD_TOKEN, UNK_TOKEN};
pub use vocab::{build_word_vocab, count_tokens, Vocabulary, PAD_INDEX, UNK_INDEX};
