use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{DataError, PhiCategory};
use crate::text::Token;

/// A gold PHI annotation over the byte range `[start, end)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PhiSpan {
    pub start: usize,
    pub end: usize,
    pub category: PhiCategory,
    pub subtype: Option<String>,
}

impl PhiSpan {
    pub fn new(start: usize, end: usize, category: PhiCategory) -> Self {
        Self {
            start,
            end,
            category,
            subtype: None,
        }
    }

    pub fn with_subtype(mut self, subtype: impl Into<String>) -> Self {
        self.subtype = Some(subtype.into());
        self
    }
}

// On disk a span is `[start, end, "CATEGORY"]` or `[start, end, "CATEGORY", "SUBTYPE"]`.
impl Serialize for PhiSpan {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match &self.subtype {
            None => (self.start, self.end, self.category).serialize(s),
            Some(sub) => (self.start, self.end, self.category, sub).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for PhiSpan {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            WithSubtype(usize, usize, PhiCategory, String),
            Plain(usize, usize, PhiCategory),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Plain(start, end, category) => PhiSpan::new(start, end, category),
            Repr::WithSubtype(start, end, category, sub) => PhiSpan::new(start, end, category).with_subtype(sub),
        })
    }
}

/// Raw text with its gold PHI spans.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledDocument {
    pub id: String,
    pub text: String,
    #[serde(rename = "spans")]
    pub phi_spans: Vec<PhiSpan>,
}

impl LabeledDocument {
    /// Checks that spans are non-empty, in bounds, on character boundaries,
    /// sorted and non-overlapping.
    pub fn validate(&self) -> Result<(), DataError> {
        let mut prev_end = 0;
        for (i, s) in self.phi_spans.iter().enumerate() {
            let bad = |why: &str| DataError::InvalidSpan {
                doc: self.id.clone(),
                index: i,
                reason: why.to_string(),
            };
            if s.start >= s.end {
                return Err(bad("empty span"));
            }
            if s.end > self.text.len() {
                return Err(bad("span past end of text"));
            }
            if !self.text.is_char_boundary(s.start) || !self.text.is_char_boundary(s.end) {
                return Err(bad("span splits a character"));
            }
            if s.start < prev_end {
                return Err(bad("spans unsorted or overlapping"));
            }
            prev_end = s.end;
        }
        Ok(())
    }

    pub fn span_text(&self, span: &PhiSpan) -> &str {
        &self.text[span.start..span.end]
    }
}

/// Gold label per token: the category of the first gold span that shares at
/// least one byte with the token.
pub fn token_labels(tokens: &[Token], spans: &[PhiSpan]) -> Vec<Option<PhiCategory>> {
    // spans are sorted and disjoint, so a forward sweep suffices
    let mut labels = Vec::with_capacity(tokens.len());
    let mut first = 0;
    for t in tokens {
        while first < spans.len() && spans[first].end <= t.start {
            first += 1;
        }
        let label = spans[first..]
            .iter()
            .take_while(|s| s.start < t.end)
            .find(|s| t.overlaps(s.start, s.end))
            .map(|s| s.category);
        labels.push(label);
    }
    labels
}

/// Writes documents as one JSON record per line.
pub fn write_corpus<W: Write>(mut out: W, docs: &[LabeledDocument]) -> std::io::Result<()> {
    for d in docs {
        serde_json::to_writer(&mut out, d)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn corpus_to_string(docs: &[LabeledDocument]) -> String {
    let mut buf = Vec::new();
    write_corpus(&mut buf, docs).expect("writing to memory");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn parse_corpus(text: &str) -> Result<Vec<LabeledDocument>, DataError> {
    let mut docs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: LabeledDocument = serde_json::from_str(line).map_err(|e| DataError::Record {
            line: n + 1,
            message: e.to_string(),
        })?;
        doc.validate()?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn save_corpus(path: &Path, docs: &[LabeledDocument]) -> Result<(), DataError> {
    fs::write(path, corpus_to_string(docs)).map_err(|e| DataError::io(path, e))
}

pub fn load_corpus(path: &Path) -> Result<Vec<LabeledDocument>, DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    parse_corpus(&text)
}
