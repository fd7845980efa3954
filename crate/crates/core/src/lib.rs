//! Clinical text de-identification as copy-or-redact sequence transduction.
//!
//! Every token of a document maps to itself or to a redaction special. A
//! transformer encoder-decoder, trained with weighted cross-entropy, learns
//! the mapping; greedy decoding restricted to the two choices applies it.

pub mod cli;
pub mod data;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod numerics;
pub mod text;
pub mod training;
