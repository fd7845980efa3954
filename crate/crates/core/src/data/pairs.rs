use super::{token_labels, LabeledDocument};
use crate::text::{tokenize, Vocabulary};
use crate::training::TrainingPair;

/// Source ids and their copy-or-redact target: position `i` keeps its
/// source id unless the token overlaps a gold PHI span, in which case it
/// becomes the vocabulary's redaction special for that span's category
/// (the shared special when the vocabulary has only one).
///
/// Weights are all 1; the trainer re-weights redaction targets.
pub fn to_training_pair(doc: &LabeledDocument, vocab: &Vocabulary) -> TrainingPair {
    let tokens = tokenize(&doc.text);
    let src_ids = vocab.encode_tokens(&tokens);
    let tgt_ids = token_labels(&tokens, &doc.phi_spans)
        .into_iter()
        .zip(&src_ids)
        .map(|(label, &src)| match label {
            Some(category) => vocab.redaction_id(category),
            None => src,
        })
        .collect();
    TrainingPair {
        weights: vec![1.0; src_ids.len()],
        src_ids,
        tgt_ids,
    }
}
