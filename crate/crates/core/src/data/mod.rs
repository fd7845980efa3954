//! Labelled corpora: the internal line-delimited format, a synthetic PHI
//! note generator, an i2b2-style XML adapter, splitting, and the
//! copy-or-redact transform that turns a document into a training pair.

mod category;
mod document;
mod i2b2;
mod pairs;
mod split;
mod synth;

pub use category::{PhiCategory, UnknownCategory};
pub use document::{
    corpus_to_string, load_corpus, parse_corpus, save_corpus, token_labels, write_corpus, LabeledDocument, PhiSpan,
};
pub use i2b2::{load_i2b2_xml, map_i2b2_type, parse_i2b2_xml, I2b2Load};
pub use pairs::to_training_pair;
pub use split::{split_corpus, CorpusSplit};
pub use synth::{generate_synthetic, CategoryWeights, SynthConfig};

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("document `{doc}`: span #{index}: {reason}")]
    InvalidSpan { doc: String, index: usize, reason: String },
    #[error("corpus line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{file}: malformed XML: {message}")]
    Xml { file: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl DataError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
