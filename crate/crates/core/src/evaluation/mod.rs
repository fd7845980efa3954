//! Token-level, micro-averaged PHI detection metrics.

mod report;

pub use report::{compare_report, parse_kv, render_report, to_kv, ReferenceRow, PUBLISHED_REFERENCE};

use std::collections::BTreeMap;

use crate::data::{token_labels, LabeledDocument, PhiCategory};
use crate::inference::{deidentify, DeidOptions, InferenceError, RedactionSpan};
use crate::model::ModelParams;
use crate::text::{tokenize, Token, Vocabulary};

/// Binary confusion counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Counts {
    pub fn record(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, other: &Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    /// `tp / (tp + fp)`; `None` when nothing was predicted.
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `tp / (tp + fn)`; `None` when there is no gold PHI.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall when both are defined.
    /// Defined as 0 when both are 0.
    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        Some(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub counts: Counts,
    /// One-vs-rest counts per category. A gold token of category `c` is a
    /// tp or fn of `c`; a false alarm is charged to the predicted category
    /// when the prediction carries one, otherwise to no category.
    pub per_category: BTreeMap<PhiCategory, Counts>,
    pub n_documents: usize,
    pub n_tokens: usize,
}

impl EvalReport {
    pub fn precision(&self) -> Option<f64> {
        self.counts.precision()
    }

    pub fn recall(&self) -> Option<f64> {
        self.counts.recall()
    }

    pub fn f1(&self) -> Option<f64> {
        self.counts.f1()
    }

    /// Micro-average composition: counts simply add.
    pub fn merge(&mut self, other: &EvalReport) {
        self.counts.add(&other.counts);
        for (c, k) in &other.per_category {
            self.per_category.entry(*c).or_default().add(k);
        }
        self.n_documents += other.n_documents;
        self.n_tokens += other.n_tokens;
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("predicted flags cover {predicted} tokens but gold covers {gold}")]
    Alignment { predicted: usize, gold: usize },
    #[error("{documents} documents but {predictions} prediction sets")]
    DocumentCount { documents: usize, predictions: usize },
    #[error("document {doc}: {source}")]
    Inference {
        doc: String,
        #[source]
        source: InferenceError,
    },
    #[error("bad report line `{line}`: {message}")]
    Parse { line: String, message: String },
}

/// Binary scoring of one flag sequence against gold flags.
pub fn token_metrics(predicted: &[bool], gold: &[bool]) -> Result<EvalReport, EvalError> {
    let labels: Vec<Option<PhiCategory>> = gold.iter().map(|&g| g.then_some(PhiCategory::Name)).collect();
    let mut r = score_document(predicted, None, &labels)?;
    r.per_category.clear();
    Ok(r)
}

/// Scores one document's predictions against gold labels, with optional
/// predicted categories for per-category false-alarm attribution.
pub fn score_document(
    predicted: &[bool],
    predicted_category: Option<&[Option<PhiCategory>]>,
    gold: &[Option<PhiCategory>],
) -> Result<EvalReport, EvalError> {
    if predicted.len() != gold.len() || predicted_category.is_some_and(|c| c.len() != gold.len()) {
        return Err(EvalError::Alignment {
            predicted: predicted.len(),
            gold: gold.len(),
        });
    }
    let mut r = EvalReport {
        n_documents: 1,
        n_tokens: gold.len(),
        ..EvalReport::default()
    };
    let mut per: BTreeMap<PhiCategory, Counts> = BTreeMap::new();
    for (i, (&p, g)) in predicted.iter().zip(gold).enumerate() {
        r.counts.record(p, g.is_some());
        match (p, g) {
            (_, Some(c)) => per.entry(*c).or_default().record(p, true),
            (true, None) => {
                if let Some(c) = predicted_category.and_then(|pc| pc[i]) {
                    per.entry(c).or_default().fp += 1;
                }
            }
            (false, None) => {}
        }
    }
    let n = gold.len() as u64;
    for k in per.values_mut() {
        k.tn = n - k.tp - k.fp - k.fn_;
    }
    r.per_category = per;
    Ok(r)
}

/// Report plus per-document warnings about gold spans that cut through a
/// token (such tokens count as PHI by the overlap rule).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusEvaluation {
    pub report: EvalReport,
    pub warnings: Vec<String>,
}

fn misalignment_warnings(doc: &LabeledDocument, tokens: &[Token], out: &mut Vec<String>) {
    for s in &doc.phi_spans {
        let cut = tokens
            .iter()
            .any(|t| t.overlaps(s.start, s.end) && (t.start < s.start || t.end > s.end));
        if cut {
            out.push(format!(
                "{}: gold span {}..{} covers part of a token; the whole token counts as PHI",
                doc.id, s.start, s.end
            ));
        }
    }
}

fn predictions_to_flags(tokens: &[Token], spans: &[RedactionSpan]) -> (Vec<bool>, Vec<Option<PhiCategory>>) {
    tokens
        .iter()
        .map(|t| match spans.iter().find(|s| t.overlaps(s.start, s.end)) {
            Some(s) => (true, s.category),
            None => (false, None),
        })
        .unzip()
}

fn score_spans(
    doc: &LabeledDocument,
    tokens: &[Token],
    predicted: &[RedactionSpan],
    eval: &mut CorpusEvaluation,
) -> Result<(), EvalError> {
    misalignment_warnings(doc, tokens, &mut eval.warnings);
    let gold = token_labels(tokens, &doc.phi_spans);
    let (flags, cats) = predictions_to_flags(tokens, predicted);
    eval.report.merge(&score_document(&flags, Some(&cats), &gold)?);
    Ok(())
}

/// Runs de-identification on every document and aggregates micro-averaged
/// counts in document order.
pub fn evaluate_corpus(
    params: &ModelParams,
    vocab: &Vocabulary,
    docs: &[LabeledDocument],
    options: &DeidOptions,
) -> Result<CorpusEvaluation, EvalError> {
    let mut eval = CorpusEvaluation::default();
    for doc in docs {
        let res = deidentify(&doc.text, params, vocab, options).map_err(|source| EvalError::Inference {
            doc: doc.id.clone(),
            source,
        })?;
        score_spans(doc, &res.tokens, &res.redaction_spans, &mut eval)?;
    }
    Ok(eval)
}

/// Scores externally produced redaction spans, e.g. a de-identification
/// sidecar file; `predictions[i]` belongs to `docs[i]`.
pub fn evaluate_predictions(
    docs: &[LabeledDocument],
    predictions: &[Vec<RedactionSpan>],
) -> Result<CorpusEvaluation, EvalError> {
    if docs.len() != predictions.len() {
        return Err(EvalError::DocumentCount {
            documents: docs.len(),
            predictions: predictions.len(),
        });
    }
    let mut eval = CorpusEvaluation::default();
    for (doc, pred) in docs.iter().zip(predictions) {
        score_spans(doc, &tokenize(&doc.text), pred, &mut eval)?;
    }
    Ok(eval)
}

#[cfg(test)]
mod tests;
