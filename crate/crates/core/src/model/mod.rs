//! Transformer encoder-decoder: post-norm layers, sinusoidal positions,
//! per-layer cross-attention in the decoder.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::Checkpoint;
pub use config::ModelConfig;
pub use forward::{
    context, decode_forward, encode, logits, positional_encoding, ForwardCtx, IncrementalDecoder, LAYER_NORM_EPS,
};
pub use params::ModelParams;

use crate::numerics::NumericsError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("parameter layout mismatch: {0}")]
    Layout(String),
    #[error("{what} sequence of length {len} is outside 1..={max}")]
    Length { what: &'static str, len: usize, max: usize },
    #[error("mask of length {mask} does not match {ids} positions")]
    Mask { ids: usize, mask: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("cannot access checkpoint {path}: {message}")]
    Io { path: String, message: String },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint was trained with vocabulary {expected} but vocabulary {found} was supplied")]
    VocabMismatch { expected: String, found: String },
}
