//! Python module `redact`: vocabularies, checkpoints, de-identification,
//! scoring and the command line.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use redact_core::data::{self, LabeledDocument};
use redact_core::evaluation::{self, EvalReport};
use redact_core::inference::{self, DecodeMode, DeidOptions};
use redact_core::model::{Checkpoint, ModelParams};
use redact_core::text::{self, RedactionScheme};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn parse_scheme(s: &str) -> PyResult<RedactionScheme> {
    match s {
        "shared" => Ok(RedactionScheme::Shared),
        "per_category" | "per-category" => Ok(RedactionScheme::PerCategory),
        _ => Err(value_err(format!("unknown scheme `{s}` (expected shared or per_category)"))),
    }
}

fn parse_docs(jsonl: &str) -> PyResult<Vec<LabeledDocument>> {
    data::parse_corpus(jsonl).map_err(value_err)
}

/// `(start, end, surface)` for every token of `text`.
#[pyfunction]
fn tokenize(text: &str) -> Vec<(usize, usize, String)> {
    text::tokenize(text).into_iter().map(|t| (t.start, t.end, t.surface)).collect()
}

/// Synthetic labelled notes as corpus lines (one JSON object per line).
#[pyfunction]
#[pyo3(signature = (n_documents, seed=0, phi_density=0.15))]
fn generate_synthetic(n_documents: usize, seed: u64, phi_density: f64) -> PyResult<String> {
    let cfg = data::SynthConfig {
        n_documents,
        seed,
        phi_density,
        ..Default::default()
    };
    let docs = data::generate_synthetic(&cfg).map_err(value_err)?;
    Ok(data::corpus_to_string(&docs))
}

#[pyclass(frozen)]
struct Vocabulary {
    inner: text::Vocabulary,
}

#[pymethods]
impl Vocabulary {
    #[staticmethod]
    #[pyo3(signature = (texts, min_freq=1, scheme="shared"))]
    fn build(texts: Vec<String>, min_freq: usize, scheme: &str) -> PyResult<Self> {
        let inner = text::Vocabulary::from_texts(&texts, min_freq, parse_scheme(scheme)?).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        text::Vocabulary::load(&path).map(|inner| Self { inner }).map_err(io_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(io_err)
    }

    fn encode(&self, text: &str) -> Vec<usize> {
        self.inner.encode_tokens(&text::tokenize(text))
    }

    fn decode(&self, ids: Vec<usize>) -> PyResult<Vec<String>> {
        self.inner.decode(&ids).map_err(value_err)
    }

    fn is_redaction(&self, id: usize) -> bool {
        self.inner.is_redaction(id)
    }

    fn content_hash(&self) -> String {
        self.inner.content_hash()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

fn report_dict(py: Python<'_>, r: &EvalReport) -> PyResult<Py<PyAny>> {
    let d = pyo3::types::PyDict::new(py);
    d.set_item("precision", r.precision())?;
    d.set_item("recall", r.recall())?;
    d.set_item("f1", r.f1())?;
    d.set_item("tp", r.counts.tp)?;
    d.set_item("fp", r.counts.fp)?;
    d.set_item("fn", r.counts.fn_)?;
    d.set_item("tn", r.counts.tn)?;
    d.set_item("documents", r.n_documents)?;
    d.set_item("tokens", r.n_tokens)?;
    Ok(d.into_any().unbind())
}

/// A trained model together with the vocabulary it was trained on.
#[pyclass(frozen)]
struct Deidentifier {
    params: ModelParams,
    vocab: text::Vocabulary,
}

#[pymethods]
impl Deidentifier {
    #[new]
    fn new(checkpoint: PathBuf, vocab: &Vocabulary) -> PyResult<Self> {
        let ck = Checkpoint::load(&checkpoint).map_err(io_err)?;
        ck.check_vocab(&vocab.inner.content_hash()).map_err(value_err)?;
        Ok(Self {
            params: ck.params,
            vocab: vocab.inner.clone(),
        })
    }

    fn parameter_count(&self) -> usize {
        self.params.config().count_params()
    }

    /// Returns the redacted text and `(start, end, category)` per redacted
    /// token; the category is `None` for a shared-special vocabulary.
    #[pyo3(signature = (text, mode="constrained", window_overlap=Some(16)))]
    fn deidentify(
        &self,
        text: &str,
        mode: &str,
        window_overlap: Option<usize>,
    ) -> PyResult<(String, Vec<(usize, usize, Option<String>)>)> {
        let options = DeidOptions {
            mode: mode.parse::<DecodeMode>().map_err(value_err)?,
            window_overlap,
        };
        let r = inference::deidentify(text, &self.params, &self.vocab, &options).map_err(value_err)?;
        let spans = r
            .redaction_spans
            .iter()
            .map(|s| (s.start, s.end, s.category.map(|c| c.to_string())))
            .collect();
        Ok((r.redacted_text, spans))
    }

    /// Token-level micro-averaged scores over corpus lines.
    #[pyo3(signature = (corpus, mode="constrained"))]
    fn evaluate(&self, py: Python<'_>, corpus: &str, mode: &str) -> PyResult<Py<PyAny>> {
        let docs = parse_docs(corpus)?;
        let options = DeidOptions {
            mode: mode.parse::<DecodeMode>().map_err(value_err)?,
            ..Default::default()
        };
        let eval = evaluation::evaluate_corpus(&self.params, &self.vocab, &docs, &options).map_err(value_err)?;
        report_dict(py, &eval.report)
    }
}

/// Runs the `redact` command line in-process; returns `(exit_code, stdout)`.
#[pyfunction]
fn run_cli(args: Vec<String>) -> (i32, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("redact".to_string()).chain(args);
    let code = match redact_core::cli::run(argv, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            if e.code != 0 {
                eprintln!("error: {}", e.message);
            } else {
                out.extend_from_slice(e.message.as_bytes());
            }
            e.code
        }
    };
    (code, String::from_utf8_lossy(&out).into_owned())
}

#[pymodule]
fn redact(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add_class::<Vocabulary>()?;
    m.add_class::<Deidentifier>()?;
    Ok(())
}
