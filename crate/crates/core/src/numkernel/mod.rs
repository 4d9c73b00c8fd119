//! Small deterministic differentiable kernels.
//!
//! Every layer exposes an explicit forward pass that returns a cache and a
//! backward pass that consumes it; there is no tape. Parameters live in a
//! [`ParamStore`] and gradients in a parallel [`Gradients`] buffer, so
//! per-example gradients can be computed on worker threads and summed in a
//! fixed order.

mod activation;
mod adam;
mod checkpoint;
mod dense;
mod gradcheck;
mod layernorm;
mod loss;
mod lstm;
mod params;
mod tensor;

pub use activation::{sigmoid, softmax, softmax_backward, softmax_in_place, Activation};
pub use adam::{adam_update, AdamConfig, AdamState, DEFAULT_LEARNING_RATE};
pub use checkpoint::{manifest_path, sha256_hex, Checkpoint, DTYPE, FORMAT_VERSION, MAGIC};
pub use dense::{dense_backward, dense_forward, Dense, DenseCache, DenseGrads};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, DEFAULT_STEP, RELATIVE_FLOOR};
pub use layernorm::{layer_norm_backward, layer_norm_forward, LayerNormCache, LAYER_NORM_EPS};
pub use loss::{cross_entropy_loss, loss, mse_loss, LossKind, LossOutput, Targets};
pub use lstm::{lstm_step, lstm_step_backward, Lstm, LstmCache, LstmStepCache, LstmStepGrads, LstmWeights};
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use tensor::{dot, matmul_acc, matmul_nt_acc, matmul_tn_acc, Tensor};
