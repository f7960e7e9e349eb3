use std::ops::Range;

use super::wordpiece::{wordpiece_tokenize, SubwordVocab};
use crate::error::{Error, Result};

/// Label given to non-initial pieces. Masked from the loss and never scored.
pub const PAD_LABEL: &str = "X";

/// Piece-level view of a word sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PieceAlignment {
    pub pieces: Vec<String>,
    pub word_index: Vec<usize>,
    pub is_first_piece: Vec<bool>,
}

impl PieceAlignment {
    pub fn new<S: AsRef<str>>(words: &[S], vocab: &SubwordVocab) -> Self {
        let split: Vec<Vec<String>> = words
            .iter()
            .map(|w| wordpiece_tokenize(w.as_ref(), vocab))
            .collect();
        Self::from_splits(&split)
    }

    /// Alignment from explicit per-word piece lists (each non-empty).
    pub fn from_splits(split: &[Vec<String>]) -> Self {
        let mut a = Self {
            pieces: Vec::new(),
            word_index: Vec::new(),
            is_first_piece: Vec::new(),
        };
        for (w, ps) in split.iter().enumerate() {
            for (k, p) in ps.iter().enumerate() {
                a.pieces.push(p.clone());
                a.word_index.push(w);
                a.is_first_piece.push(k == 0);
            }
        }
        a
    }

    pub fn num_words(&self) -> usize {
        self.word_index.last().map_or(0, |w| w + 1)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Position of each word's first piece.
    pub fn first_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_first_piece[i]).collect()
    }

    /// Number of pieces per word.
    pub fn piece_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_words()];
        for &w in &self.word_index {
            counts[w] += 1;
        }
        counts
    }
}

/// First piece of each word inherits its tag; every later piece gets [`PAD_LABEL`].
pub fn align_labels<S: AsRef<str>>(word_tags: &[S], alignment: &PieceAlignment) -> Result<Vec<String>> {
    if word_tags.len() != alignment.num_words() {
        return Err(Error::LengthMismatch(format!(
            "{} word tags for {} words",
            word_tags.len(),
            alignment.num_words()
        )));
    }
    Ok(alignment
        .word_index
        .iter()
        .zip(&alignment.is_first_piece)
        .map(|(&w, &first)| {
            if first {
                word_tags[w].as_ref().to_string()
            } else {
                PAD_LABEL.to_string()
            }
        })
        .collect())
}

/// Inverse of [`align_labels`]: a word takes its first piece's tag. Tags on
/// continuation pieces are ignored; a first piece predicted as [`PAD_LABEL`] reads as `O`.
pub fn collapse_predictions<S: AsRef<str>>(piece_tags: &[S], alignment: &PieceAlignment) -> Result<Vec<String>> {
    if piece_tags.len() != alignment.len() {
        return Err(Error::LengthMismatch(format!(
            "{} piece tags for {} pieces",
            piece_tags.len(),
            alignment.len()
        )));
    }
    Ok(piece_tags
        .iter()
        .zip(&alignment.is_first_piece)
        .filter(|(_, &first)| first)
        .map(|(t, _)| {
            let t = t.as_ref();
            if t == PAD_LABEL { "O" } else { t }.to_string()
        })
        .collect())
}

/// Splits words into consecutive ranges whose piece totals stay within `limit`,
/// breaking only at word boundaries. A single word longer than `limit` gets a
/// range of its own.
pub fn chunk_words(piece_counts: &[usize], limit: usize) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut used = 0;
    for (i, &n) in piece_counts.iter().enumerate() {
        if used > 0 && used + n > limit {
            out.push(start..i);
            start = i;
            used = 0;
        }
        used += n;
    }
    if start < piece_counts.len() {
        out.push(start..piece_counts.len());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn splits(layout: &[&[&str]]) -> PieceAlignment {
        PieceAlignment::from_splits(
            &layout
                .iter()
                .map(|w| w.iter().map(|s| s.to_string()).collect())
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn first_piece_gets_label() {
        let a = splits(&[&["de", "##fib"]]);
        assert_eq!(align_labels(&["B-prob"], &a).unwrap(), ["B-prob", "X"]);
        let a = splits(&[&["a"], &["b", "##c"]]);
        assert_eq!(align_labels(&["B-t", "I-t"], &a).unwrap(), ["B-t", "I-t", "X"]);
    }

    #[test]
    fn single_piece_words_identity() {
        let a = splits(&[&["a"], &["b"], &["c"]]);
        assert_eq!(align_labels(&["O", "B-t", "I-t"], &a).unwrap(), ["O", "B-t", "I-t"]);
    }

    #[test]
    fn length_mismatch() {
        let a = splits(&[&["a"], &["b"]]);
        assert!(align_labels(&["O"], &a).is_err());
    }

    #[test]
    fn collapse_ignores_continuations() {
        let a = splits(&[&["de", "##fib"]]);
        assert_eq!(collapse_predictions(&["B-t", "X"], &a).unwrap(), ["B-t"]);
        assert_eq!(collapse_predictions(&["B-t", "I-q"], &a).unwrap(), ["B-t"]);
        assert_eq!(collapse_predictions(&["X", "B-t"], &a).unwrap(), ["O"]);
    }

    #[test]
    fn chunking() {
        assert_eq!(chunk_words(&[2, 2, 2, 2], 4), vec![0..2, 2..4]);
        assert_eq!(chunk_words(&[1, 9, 1], 4), vec![0..1, 1..2, 2..3]);
        assert_eq!(chunk_words(&[], 4), Vec::<Range<usize>>::new());
    }

    proptest! {
        #[test]
        fn collapse_inverts_align(
            words in proptest::collection::vec((0usize..5, 1usize..4), 0..30)
        ) {
            let tags: Vec<String> = words.iter().map(|(t, _)| match t {
                0 => "O".to_string(),
                1 => "B-a".to_string(),
                2 => "I-a".to_string(),
                3 => "B-b".to_string(),
                _ => "I-b".to_string(),
            }).collect();
            let split: Vec<Vec<String>> = words
                .iter()
                .map(|(_, n)| (0..*n).map(|k| if k == 0 { "w".into() } else { "##p".into() }).collect())
                .collect();
            let a = PieceAlignment::from_splits(&split);
            let pieces = align_labels(&tags, &a).unwrap();
            prop_assert_eq!(collapse_predictions(&pieces, &a).unwrap(), tags);
        }
    }
}
