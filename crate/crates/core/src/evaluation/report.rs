use std::collections::BTreeMap;
use std::fmt::Write;

use super::{Counts, EvalError, EvalReport};
use crate::data::PhiCategory;

/// A published metric triple, in percent, shown beside our numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceRow {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Reported i2b2 2014 token-level result of the original seq2seq system.
pub const PUBLISHED_REFERENCE: (&str, f64, f64, f64) = ("Proposed Method", 98.12, 98.91, 98.51);

impl ReferenceRow {
    pub fn published() -> Self {
        let (label, precision, recall, f1) = PUBLISHED_REFERENCE;
        Self {
            label: label.to_string(),
            precision,
            recall,
            f1,
        }
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{:.2}", 100.0 * v))
}

/// Our metrics first, then each reference row in input order. Reference
/// rows are labelled as not reproduced.
pub fn compare_report(ours: &EvalReport, label: &str, references: &[ReferenceRow]) -> String {
    let mut rows = vec![(
        label.to_string(),
        pct(ours.precision()),
        pct(ours.recall()),
        pct(ours.f1()),
    )];
    for r in references {
        rows.push((
            format!("{} [reference (not reproduced)]", r.label),
            format!("{:.2}", r.precision),
            format!("{:.2}", r.recall),
            format!("{:.2}", r.f1),
        ));
    }
    let w = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(6);
    let mut out = String::new();
    let _ = writeln!(out, "{:<w$}  {:>9}  {:>9}  {:>9}", "system", "precision", "recall", "f1");
    for (l, p, r, f) in rows {
        let _ = writeln!(out, "{l:<w$}  {p:>9}  {r:>9}  {f:>9}");
    }
    out
}

/// Human-readable counts and metrics, overall and per category.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "documents: {}  tokens: {}", report.n_documents, report.n_tokens);
    let _ = writeln!(
        out,
        "{:<10}  {:>7}  {:>7}  {:>7}  {:>9}  {:>9}  {:>9}  {:>9}",
        "scope", "tp", "fp", "fn", "tn", "precision", "recall", "f1"
    );
    let mut line = |name: &str, c: &Counts| {
        let _ = writeln!(
            out,
            "{name:<10}  {:>7}  {:>7}  {:>7}  {:>9}  {:>9}  {:>9}  {:>9}",
            c.tp,
            c.fp,
            c.fn_,
            c.tn,
            pct(c.precision()),
            pct(c.recall()),
            pct(c.f1())
        );
    };
    line("overall", &report.counts);
    for (cat, c) in &report.per_category {
        line(cat.as_str(), c);
    }
    out
}

fn metric(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| v.to_string())
}

/// Line-delimited `key=value` dump: an `overall` line, then one line per
/// category.
pub fn to_kv(report: &EvalReport) -> String {
    let mut out = String::new();
    let counts = |c: &Counts| {
        format!(
            "tp={} fp={} fn={} tn={} precision={} recall={} f1={}",
            c.tp,
            c.fp,
            c.fn_,
            c.tn,
            metric(c.precision()),
            metric(c.recall()),
            metric(c.f1())
        )
    };
    let _ = writeln!(
        out,
        "scope=overall n_documents={} n_tokens={} {}",
        report.n_documents,
        report.n_tokens,
        counts(&report.counts)
    );
    for (cat, c) in &report.per_category {
        let _ = writeln!(out, "scope={cat} {}", counts(c));
    }
    out
}

/// Reads counts back from [`to_kv`] output; derived metrics are ignored.
pub fn parse_kv(text: &str) -> Result<EvalReport, EvalError> {
    let mut report = EvalReport::default();
    let mut saw_overall = false;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let bad = |m: String| EvalError::Parse {
            line: line.to_string(),
            message: m,
        };
        let mut f = BTreeMap::new();
        for part in line.split_whitespace() {
            let (k, v) = part.split_once('=').ok_or_else(|| bad(format!("`{part}` is not key=value")))?;
            f.insert(k, v);
        }
        let int = |k: &str| -> Result<u64, EvalError> {
            f.get(k)
                .ok_or_else(|| bad(format!("missing `{k}`")))?
                .parse()
                .map_err(|_| bad(format!("`{k}` is not an integer")))
        };
        let c = Counts {
            tp: int("tp")?,
            fp: int("fp")?,
            fn_: int("fn")?,
            tn: int("tn")?,
        };
        match f.get("scope").copied() {
            Some("overall") => {
                report.counts = c;
                report.n_documents = int("n_documents")? as usize;
                report.n_tokens = int("n_tokens")? as usize;
                saw_overall = true;
            }
            Some(cat) => {
                let cat: PhiCategory = cat.parse().map_err(|_| bad(format!("unknown scope `{cat}`")))?;
                report.per_category.insert(cat, c);
            }
            None => return Err(bad("missing `scope`".into())),
        }
    }
    if !saw_overall {
        return Err(EvalError::Parse {
            line: String::new(),
            message: "no `scope=overall` line".into(),
        });
    }
    Ok(report)
}
