//! Error correction code transformer (ECCT).
//!
//! The decoder reads the reliability vector `[|y|, syn(y_b)]`, embeds each
//! position as a scaled learnable vector, runs masked self-attention where
//! the mask follows the Tanner graph of `H`, and predicts the sign of the
//! multiplicative noise `z~ = h + x_s z`. Multiplying `y = x_s z~` by that
//! sign recovers `x_s`.

mod mask;
mod model;
mod train;

use thiserror::Error;

pub use mask::{build_mask, diagonal_mask};
pub use model::{embedding_scales, postprocess_logits, postprocess_sign, preprocess, EcctArch, EcctModel};
pub use train::{loss_and_grads, sample_batch, train, Batch, TrainConfig};

use crate::gf2::CodeError;
use crate::nn::{Checkpoint, NnError};

#[derive(Debug, Error)]
pub enum EcctError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error("bad ECCT checkpoint: {0}")]
    Checkpoint(String),
    #[error("training diverged at step {step} (loss {loss})")]
    Diverged {
        step: usize,
        loss: f64,
        last_good: Box<Checkpoint>,
    },
}
