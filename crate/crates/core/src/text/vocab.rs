use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{TextError, Token};
use crate::data::PhiCategory;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];
const FIRST_SPECIAL: usize = 4;

/// How PHI tokens are replaced: one shared special, or one per category.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RedactionScheme {
    Shared,
    PerCategory,
}

impl RedactionScheme {
    fn special_count(self) -> usize {
        match self {
            RedactionScheme::Shared => 1,
            RedactionScheme::PerCategory => PhiCategory::ALL.len(),
        }
    }
}

/// Bidirectional token/id map shared by encoder and decoder.
///
/// Id layout: `PAD, BOS, EOS, UNK`, then the redaction specials, then
/// ordinary tokens in descending corpus frequency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    scheme: RedactionScheme,
}

fn special_line(category: Option<PhiCategory>) -> String {
    match category {
        None => "<redacted>".to_string(),
        Some(c) => format!("<redacted:{c}>"),
    }
}

/// Strings that collide with the file form of reserved or special lines.
/// The tokenizer never yields them since `<` is always split off.
fn is_reserved_form(t: &str) -> bool {
    t.is_empty() || t.starts_with("<redacted") || RESERVED.contains(&t)
}

impl Vocabulary {
    fn with_tokens(scheme: RedactionScheme, ordinary: Vec<String>) -> Self {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        match scheme {
            RedactionScheme::Shared => tokens.push(special_line(None)),
            RedactionScheme::PerCategory => {
                tokens.extend(PhiCategory::ALL.iter().map(|&c| special_line(Some(c))))
            }
        }
        let first_ordinary = tokens.len();
        tokens.extend(ordinary);
        let index = tokens
            .iter()
            .enumerate()
            .skip(first_ordinary)
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            tokens,
            index,
            scheme,
        }
    }

    /// Builds a vocabulary from tokenised documents. Tokens seen at least
    /// `min_freq` times get ids by descending frequency, ties broken by
    /// byte-wise lexicographic order.
    pub fn build<I, S>(corpus: I, min_freq: usize, scheme: RedactionScheme) -> Result<Self, TextError>
    where
        I: IntoIterator,
        I::Item: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_freq == 0 {
            return Err(TextError::MinFreq);
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut docs = 0usize;
        for doc in corpus {
            docs += 1;
            for tok in doc {
                *counts.entry(tok.as_ref().to_string()).or_default() += 1;
            }
        }
        if docs == 0 {
            return Err(TextError::EmptyCorpus);
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_freq && !is_reserved_form(t))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(Self::with_tokens(scheme, kept.into_iter().map(|(t, _)| t).collect()))
    }

    /// Builds directly from token structs (convenience over surfaces).
    pub fn build_from_tokens(docs: &[Vec<Token>], min_freq: usize, scheme: RedactionScheme) -> Result<Self, TextError> {
        Self::build(
            docs.iter().map(|d| d.iter().map(|t| t.surface.as_str())),
            min_freq,
            scheme,
        )
    }

    /// Tokenises each document text and builds from the surfaces.
    pub fn from_texts<I, S>(texts: I, min_freq: usize, scheme: RedactionScheme) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let docs: Vec<Vec<Token>> = texts.into_iter().map(|t| super::tokenize(t.as_ref())).collect();
        Self::build_from_tokens(&docs, min_freq, scheme)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn scheme(&self) -> RedactionScheme {
        self.scheme
    }

    pub fn reserved_len(&self) -> usize {
        FIRST_SPECIAL + self.scheme.special_count()
    }

    /// Ids of the redaction specials.
    pub fn redaction_ids(&self) -> std::ops::Range<usize> {
        FIRST_SPECIAL..self.reserved_len()
    }

    pub fn is_redaction(&self, id: usize) -> bool {
        self.redaction_ids().contains(&id)
    }

    /// The special used for a PHI token of `category`.
    pub fn redaction_id(&self, category: PhiCategory) -> usize {
        match self.scheme {
            RedactionScheme::Shared => FIRST_SPECIAL,
            RedactionScheme::PerCategory => FIRST_SPECIAL + category.index(),
        }
    }

    /// Category carried by a per-category special; `None` for the shared
    /// special and for every non-special id.
    pub fn redaction_category(&self, id: usize) -> Option<PhiCategory> {
        match self.scheme {
            RedactionScheme::PerCategory if self.is_redaction(id) => Some(PhiCategory::ALL[id - FIRST_SPECIAL]),
            _ => None,
        }
    }

    pub fn id(&self, surface: &str) -> usize {
        if let Some(&id) = self.index.get(surface) {
            return id;
        }
        match RESERVED.iter().position(|r| *r == surface) {
            Some(i) if i != UNK => i,
            _ => UNK,
        }
    }

    pub fn encode<S: AsRef<str>>(&self, surfaces: &[S]) -> Vec<usize> {
        surfaces.iter().map(|s| self.id(s.as_ref())).collect()
    }

    pub fn encode_tokens(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(&t.surface)).collect()
    }

    /// Display form of one id: specials become `REDACTED` or
    /// `REDACTED-<CATEGORY>`.
    pub fn surface(&self, id: usize) -> Result<String, TextError> {
        if id >= self.tokens.len() {
            return Err(TextError::InvalidId { id, len: self.tokens.len() });
        }
        if self.is_redaction(id) {
            return Ok(match self.redaction_category(id) {
                None => "REDACTED".to_string(),
                Some(c) => format!("REDACTED-{c}"),
            });
        }
        Ok(self.tokens[id].clone())
    }

    pub fn decode(&self, ids: &[usize]) -> Result<Vec<String>, TextError> {
        ids.iter().map(|&id| self.surface(id)).collect()
    }

    /// Line-oriented file form: line number is the id.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, TextError> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < RESERVED.len() + 1 {
            return Err(TextError::Format("file shorter than the reserved header".into()));
        }
        for (i, expected) in RESERVED.iter().enumerate() {
            if lines[i] != *expected {
                return Err(TextError::Format(format!(
                    "line {}: expected `{expected}`, found `{}`",
                    i + 1,
                    lines[i]
                )));
            }
        }
        let scheme = if lines[FIRST_SPECIAL] == special_line(None) {
            RedactionScheme::Shared
        } else {
            RedactionScheme::PerCategory
        };
        let vocab_specials = Self::with_tokens(scheme, Vec::new());
        let n_reserved = vocab_specials.tokens.len();
        for i in FIRST_SPECIAL..n_reserved {
            if lines.get(i) != Some(&vocab_specials.tokens[i].as_str()) {
                return Err(TextError::Format(format!(
                    "line {}: expected `{}`",
                    i + 1,
                    vocab_specials.tokens[i]
                )));
            }
        }
        let ordinary: Vec<String> = lines[n_reserved..].iter().map(|s| s.to_string()).collect();
        let vocab = Self::with_tokens(scheme, ordinary);
        if vocab.index.len() != vocab.tokens.len() - n_reserved {
            return Err(TextError::Format("duplicate token".into()));
        }
        if let Some(bad) = vocab.tokens[n_reserved..]
            .iter()
            .find(|t| is_reserved_form(t))
        {
            return Err(TextError::Format(format!("invalid ordinary token `{bad}`")));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<(), TextError> {
        fs::write(path, self.to_text()).map_err(|e| TextError::Io(path.display().to_string(), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let text = fs::read_to_string(path).map_err(|e| TextError::Io(path.display().to_string(), e.to_string()))?;
        Self::from_text(&text)
    }

    /// SHA-256 of the file form, hex encoded.
    pub fn content_hash(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
