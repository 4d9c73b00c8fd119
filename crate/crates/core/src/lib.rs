pub mod corpus;
pub mod embed_ctx;
pub mod embed_static;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod numkernel;
pub mod rng;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/numkernel.md")]
    mod numkernel {}
    #[doc = include_str!("../../../book/src/static.md")]
    mod static_embeddings {}
    #[doc = include_str!("../../../book/src/contextual.md")]
    mod contextual {}
    #[doc = include_str!("../../../book/src/estimator.md")]
    mod estimator {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
