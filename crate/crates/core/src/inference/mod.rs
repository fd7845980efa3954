//! Length-synchronised greedy de-identification.

mod window;

pub use window::{window_long_document, Windowing};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::PhiCategory;
use crate::model::{IncrementalDecoder, ModelError, ModelParams};
use crate::text::{render_with, tokenize, Token, Vocabulary, BOS};

/// Decoding alphabet per position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    /// Position `i` may emit only the source token at `i` or a redaction special.
    #[default]
    Constrained,
    /// Free argmax over the whole vocabulary.
    Unconstrained,
}

impl fmt::Display for DecodeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecodeMode::Constrained => "constrained",
            DecodeMode::Unconstrained => "unconstrained",
        })
    }
}

impl FromStr for DecodeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "constrained" => Ok(DecodeMode::Constrained),
            "unconstrained" => Ok(DecodeMode::Unconstrained),
            _ => Err(format!("unknown decode mode `{s}` (expected constrained or unconstrained)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeidOptions {
    pub mode: DecodeMode,
    /// Overlap between windows for documents longer than `max_len`. With
    /// `None` such documents are rejected instead.
    pub window_overlap: Option<usize>,
}

impl Default for DeidOptions {
    fn default() -> Self {
        Self {
            mode: DecodeMode::Constrained,
            window_overlap: Some(16),
        }
    }
}

impl DeidOptions {
    pub fn strict(mode: DecodeMode) -> Self {
        Self {
            mode,
            window_overlap: None,
        }
    }
}

/// Byte range of one redacted token; the category is known only when the
/// vocabulary has per-category specials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RedactionSpan {
    pub start: usize,
    pub end: usize,
    pub category: Option<PhiCategory>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeidResult {
    pub redacted_text: String,
    pub tokens: Vec<Token>,
    pub source_ids: Vec<usize>,
    pub output_ids: Vec<usize>,
    /// One entry per position whose output is a redaction special.
    pub redaction_spans: Vec<RedactionSpan>,
    pub mode: DecodeMode,
    pub n_windows: usize,
}

impl DeidResult {
    pub fn redacted_flags(&self, vocab: &Vocabulary) -> Vec<bool> {
        self.output_ids.iter().map(|&id| vocab.is_redaction(id)).collect()
    }

    /// Positions whose output is neither the source copy nor a special.
    pub fn alphabet_violations(&self, vocab: &Vocabulary) -> usize {
        self.output_ids
            .iter()
            .zip(&self.source_ids)
            .filter(|(&o, &s)| o != s && !vocab.is_redaction(o))
            .count()
    }

    /// `alphabet_violations / k`, undefined for an empty document.
    pub fn violation_rate(&self, vocab: &Vocabulary) -> Option<f64> {
        (!self.output_ids.is_empty()).then(|| self.alphabet_violations(vocab) as f64 / self.output_ids.len() as f64)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum InferenceError {
    #[error("model expects a vocabulary of {model} entries but the vocabulary has {vocab}")]
    VocabSize { model: usize, vocab: usize },
    #[error("document has {len} tokens, more than max_len {max}, and windowing is disabled")]
    TooLong { len: usize, max: usize },
    #[error("window overlap {overlap} must be below max_len {max}")]
    Window { overlap: usize, max: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn argmax_over(logits: &[f64], candidates: impl Iterator<Item = usize>) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for c in candidates {
        if best.is_none_or(|(_, v)| logits[c] > v) {
            best = Some((c, logits[c]));
        }
    }
    best.expect("non-empty candidate set").0
}

/// Greedy decode of exactly `src_ids.len()` steps, each fed the previous
/// output. `src_ids` must fit in one window.
pub fn decode_ids(
    params: &ModelParams,
    vocab: &Vocabulary,
    src_ids: &[usize],
    mode: DecodeMode,
) -> Result<Vec<usize>, InferenceError> {
    if src_ids.is_empty() {
        return Ok(Vec::new());
    }
    let specials = vocab.redaction_ids();
    let mut dec = IncrementalDecoder::new(params, src_ids)?;
    let mut out = Vec::with_capacity(src_ids.len());
    let mut prev = BOS;
    for &src in src_ids {
        let logits = dec.step(prev)?;
        let next = match mode {
            DecodeMode::Constrained => argmax_over(&logits, std::iter::once(src).chain(specials.clone())),
            DecodeMode::Unconstrained => argmax_over(&logits, 0..logits.len()),
        };
        out.push(next);
        prev = next;
    }
    Ok(out)
}

/// Tokenises, decodes (windowed when too long) and renders one document.
pub fn deidentify(
    text: &str,
    params: &ModelParams,
    vocab: &Vocabulary,
    options: &DeidOptions,
) -> Result<DeidResult, InferenceError> {
    let cfg = params.config();
    if cfg.vocab_size != vocab.len() {
        return Err(InferenceError::VocabSize {
            model: cfg.vocab_size,
            vocab: vocab.len(),
        });
    }
    let tokens = tokenize(text);
    let source_ids = vocab.encode_tokens(&tokens);
    let k = tokens.len();
    let (output_ids, n_windows) = if k <= cfg.max_len {
        (decode_ids(params, vocab, &source_ids, options.mode)?, usize::from(k > 0))
    } else {
        let overlap = options.window_overlap.ok_or(InferenceError::TooLong { len: k, max: cfg.max_len })?;
        if overlap >= cfg.max_len {
            return Err(InferenceError::Window {
                overlap,
                max: cfg.max_len,
            });
        }
        let w = window_long_document(k, cfg.max_len, overlap);
        let outputs = w
            .windows
            .iter()
            .map(|r| decode_ids(params, vocab, &source_ids[r.clone()], options.mode))
            .collect::<Result<Vec<_>, _>>()?;
        (w.reassemble(&outputs, |id| vocab.is_redaction(id)), w.windows.len())
    };

    let mut redaction_spans = Vec::new();
    let mut rendered: Vec<String> = Vec::with_capacity(k);
    for ((t, &src), &out) in tokens.iter().zip(&source_ids).zip(&output_ids) {
        if vocab.is_redaction(out) {
            redaction_spans.push(RedactionSpan {
                start: t.start,
                end: t.end,
                category: vocab.redaction_category(out),
            });
        }
        rendered.push(if out == src {
            t.surface.clone()
        } else {
            vocab.surface(out).unwrap_or_default()
        });
    }
    let refs: Vec<&str> = rendered.iter().map(String::as_str).collect();
    Ok(DeidResult {
        redacted_text: render_with(text, &tokens, &refs),
        tokens,
        source_ids,
        output_ids,
        redaction_spans,
        mode: options.mode,
        n_windows,
    })
}

/// Independent per-document calls; failures are reported per entry.
pub fn deidentify_batch<S: AsRef<str>>(
    documents: &[S],
    params: &ModelParams,
    vocab: &Vocabulary,
    options: &DeidOptions,
) -> Vec<Result<DeidResult, InferenceError>> {
    documents
        .iter()
        .map(|d| deidentify(d.as_ref(), params, vocab, options))
        .collect()
}
