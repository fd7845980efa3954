//! Tokenisation and the token/id vocabulary.

mod tokenize;
mod vocab;

pub use tokenize::{detokenize, render_with, tokenize, Token};
pub use vocab::{RedactionScheme, Vocabulary, BOS, EOS, PAD, UNK};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("min_freq must be at least 1")]
    MinFreq,
    #[error("id {id} is not in the vocabulary (size {len})")]
    InvalidId { id: usize, len: usize },
    #[error("malformed vocabulary file: {0}")]
    Format(String),
    #[error("{0}: {1}")]
    Io(String, String),
}
