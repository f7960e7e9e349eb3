use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use crate::error::{Error, Result};

/// Prefix carried by non-initial pieces.
pub const CONTINUATION: &str = "##";

pub const UNK: &str = "[UNK]";
pub const PAD: &str = "[PAD]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// Words longer than this many characters map straight to `[UNK]`.
const MAX_WORD_CHARS: usize = 100;

/// WordPiece vocabulary: line index is piece id.
#[derive(Clone, Debug, PartialEq)]
pub struct SubwordVocab {
    pieces: Vec<String>,
    index: HashMap<String, usize>,
    unk: usize,
    pad: Option<usize>,
    cls: Option<usize>,
    sep: Option<usize>,
    lowercase: bool,
}

impl SubwordVocab {
    /// Loads a published `vocab.txt` layout, one piece per line. `[UNK]` must be present.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut pieces = Vec::new();
        for line in reader.lines() {
            let line = line?;
            pieces.push(line.trim_end_matches('\r').to_string());
        }
        Self::from_ordered(pieces)
    }

    fn from_ordered(pieces: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(pieces.len());
        for (i, p) in pieces.iter().enumerate() {
            index.entry(p.clone()).or_insert(i);
        }
        let unk = *index
            .get(UNK)
            .ok_or_else(|| Error::InvalidArgument(format!("vocabulary lacks {UNK}")))?;
        Ok(Self {
            pad: index.get(PAD).copied(),
            cls: index.get(CLS).copied(),
            sep: index.get(SEP).copied(),
            pieces,
            index,
            unk,
            lowercase: false,
        })
    }

    /// Builds a vocabulary from explicit pieces, prepending any missing special tokens.
    pub fn from_pieces<I, S>(pieces: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let given: Vec<String> = pieces.into_iter().map(Into::into).collect();
        let mut all: Vec<String> = [PAD, UNK, CLS, SEP]
            .iter()
            .filter(|s| !given.iter().any(|g| g == *s))
            .map(|s| s.to_string())
            .collect();
        all.extend(given);
        Self::from_ordered(all).expect("UNK inserted")
    }

    /// Deterministic vocabulary for corpora without a released one: every
    /// character as an initial and a continuation piece, plus whole words
    /// seen at least `min_count` times. Not a trained subword inventory.
    pub fn derive<S: AsRef<str>>(words: &[S], min_count: usize, lowercase: bool) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut chars = BTreeSet::new();
        for w in words {
            let w = if lowercase {
                w.as_ref().to_lowercase()
            } else {
                w.as_ref().to_string()
            };
            chars.extend(w.chars());
            *counts.entry(w).or_default() += 1;
        }
        let mut pieces: Vec<String> = Vec::new();
        for c in &chars {
            pieces.push(c.to_string());
        }
        for c in &chars {
            pieces.push(format!("{CONTINUATION}{c}"));
        }
        for (w, n) in counts {
            if n >= min_count && w.chars().count() > 1 {
                pieces.push(w);
            }
        }
        let mut v = Self::from_pieces(pieces);
        v.lowercase = lowercase;
        v
    }

    pub fn with_lowercase(mut self, lowercase: bool) -> Self {
        self.lowercase = lowercase;
        self
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn contains(&self, piece: &str) -> bool {
        self.index.contains_key(piece)
    }

    pub fn id(&self, piece: &str) -> usize {
        self.index.get(piece).copied().unwrap_or(self.unk)
    }

    pub fn piece(&self, id: usize) -> Option<&str> {
        self.pieces.get(id).map(String::as_str)
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    pub fn unk_id(&self) -> usize {
        self.unk
    }

    fn special(&self, id: Option<usize>, name: &str) -> Result<usize> {
        id.ok_or_else(|| Error::InvalidArgument(format!("vocabulary lacks {name}")))
    }

    pub fn pad_id(&self) -> Result<usize> {
        self.special(self.pad, PAD)
    }

    pub fn cls_id(&self) -> Result<usize> {
        self.special(self.cls, CLS)
    }

    pub fn sep_id(&self) -> Result<usize> {
        self.special(self.sep, SEP)
    }
}

/// Greedy longest-match-first decomposition. A word with no complete
/// decomposition becomes a single `[UNK]`.
pub fn wordpiece_tokenize(word: &str, vocab: &SubwordVocab) -> Vec<String> {
    let word = if vocab.lowercase {
        word.to_lowercase()
    } else {
        word.to_string()
    };
    let chars: Vec<char> = word.chars().collect();
    if chars.is_empty() || chars.len() > MAX_WORD_CHARS {
        return vec![UNK.to_string()];
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while start < end {
            let body: String = chars[start..end].iter().collect();
            let cand = if start > 0 {
                format!("{CONTINUATION}{body}")
            } else {
                body
            };
            if vocab.contains(&cand) {
                found = Some(cand);
                break;
            }
            end -= 1;
        }
        match found {
            Some(p) => pieces.push(p),
            None => return vec![UNK.to_string()],
        }
        start = end;
    }
    pieces
}
