//! Minimal neural-network substrate: dense, convolutional and recurrent
//! layers with hand-written backward passes, MSE loss and Adam.
//!
//! Layers own their [`Param`]s (value plus accumulated gradient). A backward
//! call adds into the gradients; callers zero them between optimizer steps.

mod adam;
pub mod checkpoint;
mod conv;
mod dense;
mod loss;
mod lstm;
mod tensor;

use thiserror::Error;

pub use adam::{Adam, AdamConfig};
pub use conv::{max_pool_backward, max_pool_forward, Conv2d, ConvBlock, ConvBlockCache};
pub use dense::{relu_backward, relu_forward, tanh_backward, tanh_forward, Dense, Embedding};
pub use loss::mse_loss;
pub use lstm::{LstmCell, LstmStep};
pub use tensor::{Param, Parameterized, Real, Tensor};

pub(crate) use loss::mse_slices;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: shape mismatch, expected {expected:?}, found {found:?}")]
    Shape {
        op: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("token id {id} outside vocabulary of {vocab}")]
    OutOfVocabulary { id: usize, vocab: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
