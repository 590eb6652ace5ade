//! Dense `f32` kernels shared by every model stage.
//!
//! Public entry points take [`DenseArray`]s in channels-first layout. The
//! model itself works on channels-last buffers through the `pub(crate)`
//! helpers, which the public kernels wrap.

mod activation;
mod array;
mod conv;
mod gru;
mod linear;
mod norm;
mod rng;

pub use activation::{prelu, softmax};
pub(crate) use activation::{prelu_channels_last, softmax_in_place};
pub use array::{DenseArray, MAX_RANK};
pub use conv::{conv2d_depthwise_causal, pointwise_conv, CausalDepthwise};
pub use gru::{gru_cell, gru_sequence, Direction, GruWeights};
pub use linear::{affine_rows, matmul, Linear};
pub use norm::{batch_norm_infer, BatchNorm, LayerNorm, NORM_EPS};
pub use rng::{glorot_bound, init_uniform, SeededRng};
