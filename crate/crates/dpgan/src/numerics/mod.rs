//! Minimal reverse-mode differentiable tensor engine and the Adagrad
//! optimizer used by every model in the crate.

pub mod nn;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use optim::{clip_gradients, OptimizerState};
pub use tape::{log_softmax_pick, log_sum_exp, sigmoid, Gradients, NodeId, Tape};
pub use tensor::Tensor;

/// Default epsilon inside the Adagrad square root.
pub const ADAGRAD_EPSILON: f64 = 1e-10;
/// Default global gradient-norm clip applied before every optimizer step.
pub const GRAD_CLIP: f64 = 5.0;
