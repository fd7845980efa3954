use serde::{Deserialize, Serialize};

/// A token and the byte range `[start, end)` it occupies in its document.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn span(&self) -> (usize, usize) {
        (self.start, self.end)
    }

    /// True when `[start, end)` shares at least one byte with this token.
    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start < end && start < self.end
    }
}

/// Splits on whitespace; within each whitespace-free run, maximal runs of
/// alphanumeric characters form one token and every other character is a
/// token of its own. Case is preserved.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word_start: Option<usize> = None;
    let flush = |tokens: &mut Vec<Token>, start: &mut Option<usize>, end: usize| {
        if let Some(s) = start.take() {
            tokens.push(Token {
                surface: text[s..end].to_string(),
                start: s,
                end,
            });
        }
    };
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if word_start.is_none() {
                word_start = Some(i);
            }
            continue;
        }
        flush(&mut tokens, &mut word_start, i);
        if !c.is_whitespace() {
            let end = i + c.len_utf8();
            tokens.push(Token {
                surface: text[i..end].to_string(),
                start: i,
                end,
            });
        }
    }
    flush(&mut tokens, &mut word_start, text.len());
    tokens
}

/// Joins tokens back into text: adjacent spans are concatenated, any gap
/// becomes a single space.
pub fn detokenize(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut prev_end: Option<usize> = None;
    for t in tokens {
        if matches!(prev_end, Some(e) if e < t.start) {
            out.push(' ');
        }
        out.push_str(&t.surface);
        prev_end = Some(t.end);
    }
    out
}

/// Renders `tokens` with per-token replacement strings, copying the source
/// text that lies between tokens verbatim.
pub fn render_with(source: &str, tokens: &[Token], replacements: &[&str]) -> String {
    debug_assert_eq!(tokens.len(), replacements.len());
    let mut out = String::with_capacity(source.len());
    let mut cursor = 0;
    for (t, r) in tokens.iter().zip(replacements) {
        out.push_str(&source[cursor..t.start]);
        out.push_str(r);
        cursor = t.end;
    }
    out.push_str(&source[cursor..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn surfaces(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.surface).collect()
    }

    #[test]
    fn title_is_split_from_its_period() {
        let toks = tokenize("Mrs. Edelson");
        assert_eq!(surfaces("Mrs. Edelson"), ["Mrs", ".", "Edelson"]);
        assert_eq!(toks[0].span(), (0, 3));
        assert_eq!(toks[1].span(), (3, 4));
        assert_eq!(toks[2].span(), (5, 12));
    }

    #[test]
    fn empty_and_blank_inputs() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \n\t ").is_empty());
    }

    #[test]
    fn punctuation_and_numbers() {
        assert_eq!(
            surfaces("Call 555-123-4567 (home)."),
            ["Call", "555", "-", "123", "-", "4567", "(", "home", ")", "."]
        );
        assert_eq!(surfaces("São Paulo, 03/14"), ["São", "Paulo", ",", "03", "/", "14"]);
    }

    #[test]
    fn the_worked_example_has_ten_tokens() {
        let s = "Doctor Matthew did not prescribe insulin for Mrs. Edelson";
        assert_eq!(tokenize(s).len(), 10);
    }

    #[test]
    fn render_preserves_whitespace() {
        let src = "Dr.  Smith\nsaw";
        let toks = tokenize(src);
        let reps: Vec<&str> = toks
            .iter()
            .map(|t| if t.surface == "Smith" { "REDACTED" } else { t.surface.as_str() })
            .collect();
        assert_eq!(render_with(src, &toks, &reps), "Dr.  REDACTED\nsaw");
    }

    proptest! {
        #[test]
        fn spans_tile_non_whitespace(text in "\\PC{0,60}") {
            let toks = tokenize(&text);
            let mut covered = vec![false; text.len()];
            let mut last_end = 0;
            for t in &toks {
                prop_assert!(t.start < t.end && t.end <= text.len());
                prop_assert!(t.start >= last_end);
                last_end = t.end;
                prop_assert_eq!(&text[t.start..t.end], t.surface.as_str());
                for c in covered.iter_mut().take(t.end).skip(t.start) {
                    *c = true;
                }
            }
            for (i, ch) in text.char_indices() {
                prop_assert_eq!(covered[i], !ch.is_whitespace());
            }
        }

        #[test]
        fn detokenize_round_trips_modulo_whitespace(text in "[a-zA-Z0-9.,:/()\\- \\n\\t]{0,60}") {
            let normalized: Vec<&str> = text.split_whitespace().collect();
            let back = detokenize(&tokenize(&text));
            let back_norm: Vec<&str> = back.split_whitespace().collect();
            prop_assert_eq!(normalized, back_norm);
        }
    }
}
