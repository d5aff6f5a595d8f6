//! Denoising autoencoder over item content.
//!
//! Layer structure is symmetric, `[V, h_1, .., r, .., h_1, V]`. Hidden layers
//! use the logistic sigmoid, the middle (code) layer uses `tanh` so its
//! outputs share the range of `±1` codes, and the reconstruction layer uses
//! the sigmoid again since content entries lie in `[0, 1]`.

mod checkpoint;

pub(crate) use checkpoint::Cursor;
mod gradcheck;
mod network;
mod train;

pub use gradcheck::{gradient_check, GradTarget};
pub use network::{Activation, DaeParams, Gradients};
pub use train::{corrupt, finetune, pretrain, TrainConfig};
