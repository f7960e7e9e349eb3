//! Word tokenization, numeric normalization, WordPiece, and label alignment.

mod align;
mod wordpiece;

pub use align::{align_labels, chunk_words, collapse_predictions, PieceAlignment, PAD_LABEL};
pub use wordpiece::{wordpiece_tokenize, SubwordVocab, CONTINUATION};

use serde::{Deserialize, Serialize};

/// A token with character (not byte) offsets into its source text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenizedText {
    pub tokens: Vec<Token>,
    /// Surfaces after numeric normalization, parallel to `tokens`.
    pub normalized: Vec<String>,
}

impl TokenizedText {
    fn from_tokens(tokens: Vec<Token>) -> Self {
        let normalized = tokens.iter().map(|t| normalize_number(&t.text)).collect();
        Self { tokens, normalized }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub const NUM: &str = "NUM";

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_whitespace())
}

/// Whitespace split, then every leading and trailing punctuation character
/// becomes a token of its own.
pub fn word_tokenize(text: &str) -> TokenizedText {
    let mut tokens = Vec::new();
    for (start, chunk) in whitespace_chunks(text) {
        let chars: Vec<char> = chunk.chars().collect();
        let mut lo = 0;
        let mut hi = chars.len();
        while lo < hi && is_punct(chars[lo]) {
            lo += 1;
        }
        while hi > lo && is_punct(chars[hi - 1]) {
            hi -= 1;
        }
        for i in 0..lo {
            tokens.push(single(chars[i], start + i));
        }
        if lo < hi {
            tokens.push(Token {
                text: chars[lo..hi].iter().collect(),
                start: start + lo,
                end: start + hi,
            });
        }
        for i in hi..chars.len() {
            tokens.push(single(chars[i], start + i));
        }
    }
    TokenizedText::from_tokens(tokens)
}

/// Plain whitespace split, used where annotations address whitespace tokens (i2b2).
pub fn whitespace_tokenize(text: &str) -> TokenizedText {
    let tokens = whitespace_chunks(text)
        .into_iter()
        .map(|(start, chunk)| Token {
            end: start + chunk.chars().count(),
            text: chunk,
            start,
        })
        .collect();
    TokenizedText::from_tokens(tokens)
}

fn single(c: char, at: usize) -> Token {
    Token {
        text: c.to_string(),
        start: at,
        end: at + 1,
    }
}

fn whitespace_chunks(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut cur_start = 0;
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if !cur.is_empty() {
                out.push((cur_start, std::mem::take(&mut cur)));
            }
        } else {
            if cur.is_empty() {
                cur_start = i;
            }
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        out.push((cur_start, cur));
    }
    out
}

/// True for an optional sign, digits, and at most one decimal point.
pub fn is_numeric(token: &str) -> bool {
    let body = token.strip_prefix(['+', '-']).unwrap_or(token);
    let mut digits = 0;
    let mut dots = 0;
    for c in body.chars() {
        match c {
            '0'..='9' => digits += 1,
            '.' => dots += 1,
            _ => return false,
        }
    }
    digits > 0 && dots <= 1
}

pub fn normalize_number(token: &str) -> String {
    if is_numeric(token) {
        NUM.to_string()
    } else {
        token.to_string()
    }
}

pub fn normalize_numbers<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens.iter().map(|t| normalize_number(t.as_ref())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(t: &TokenizedText) -> Vec<&str> {
        t.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn clinical_sentence() {
        let t = word_tokenize("No CPR / No defib");
        assert_eq!(surfaces(&t), ["No", "CPR", "/", "No", "defib"]);
        assert_eq!((t.tokens[2].start, t.tokens[2].end), (7, 8));
    }

    #[test]
    fn empty_text() {
        assert!(word_tokenize("").is_empty());
        assert!(word_tokenize("  \n ").is_empty());
    }

    #[test]
    fn trailing_punctuation_split() {
        let t = word_tokenize("pH7.4,");
        assert_eq!(surfaces(&t), ["pH7.4", ","]);
        let t = word_tokenize("(CPR).");
        assert_eq!(surfaces(&t), ["(", "CPR", ")", "."]);
        assert_eq!(t.tokens[3].start, 5);
    }

    #[test]
    fn offsets_are_chars_not_bytes() {
        let t = word_tokenize("café 12°");
        assert_eq!(surfaces(&t), ["café", "12", "°"]);
        assert_eq!((t.tokens[1].start, t.tokens[1].end), (5, 7));
    }

    #[test]
    fn numbers() {
        assert_eq!(normalize_number("64"), "NUM");
        assert_eq!(normalize_number("NUM"), "NUM");
        assert_eq!(normalize_number("B12"), "B12");
        assert_eq!(normalize_number("-3.5"), "NUM");
        assert_eq!(normalize_number("1.2.3"), "1.2.3");
        assert_eq!(normalize_number("."), ".");
        let t = word_tokenize("Brother died 64 / MI");
        assert_eq!(t.normalized, ["Brother", "died", "NUM", "/", "MI"]);
    }

    #[test]
    fn casing_retained() {
        assert_eq!(normalize_numbers(&["CPR", "Defib"]), ["CPR", "Defib"]);
    }

    #[test]
    fn whitespace_only_split() {
        let t = whitespace_tokenize("pt  feeling weaker.\nBP 120/80");
        assert_eq!(surfaces(&t), ["pt", "feeling", "weaker.", "BP", "120/80"]);
        assert_eq!(t.tokens[3].start, 20);
    }
}
