use std::ops::Range;

/// Token windows covering a long document and, per position, every
/// `(window, offset)` that sees it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Windowing {
    pub windows: Vec<Range<usize>>,
    pub cover: Vec<Vec<(usize, usize)>>,
}

/// Windows of at most `max_len` tokens advancing by `max_len - overlap`;
/// the last window ends at `n_tokens`. A document that fits is one window.
///
/// # Panics
/// If `overlap >= max_len`.
pub fn window_long_document(n_tokens: usize, max_len: usize, overlap: usize) -> Windowing {
    assert!(overlap < max_len, "overlap {overlap} must be below max_len {max_len}");
    let stride = max_len - overlap;
    let mut windows = Vec::new();
    let mut start = 0;
    while start < n_tokens {
        let end = (start + max_len).min(n_tokens);
        windows.push(start..end);
        if end == n_tokens {
            break;
        }
        start += stride;
    }
    let mut cover = vec![Vec::new(); n_tokens];
    for (w, r) in windows.iter().enumerate() {
        for (off, pos) in r.clone().enumerate() {
            cover[pos].push((w, off));
        }
    }
    Windowing { windows, cover }
}

impl Windowing {
    /// Merges per-window outputs. A position is redacted when any covering
    /// window redacts it (the first such window supplies the special);
    /// otherwise the first covering window's output is kept.
    pub fn reassemble(&self, outputs: &[Vec<usize>], is_special: impl Fn(usize) -> bool) -> Vec<usize> {
        self.cover
            .iter()
            .map(|seen| {
                seen.iter()
                    .map(|&(w, off)| outputs[w][off])
                    .find(|&id| is_special(id))
                    .unwrap_or_else(|| {
                        let (w, off) = seen[0];
                        outputs[w][off]
                    })
            })
            .collect()
    }
}
