use log::warn;
use serde::{Deserialize, Serialize};

use super::Document;
use crate::error::{Error, Result};
use crate::tokenize::Token;

/// Token-level IOB view of (part of) a document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub doc_id: String,
    pub tokens: Vec<String>,
    /// Character span of each token in the source document.
    pub spans: Vec<(usize, usize)>,
    pub tags: Vec<String>,
}

impl LabeledSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Token range `[first, last)` touched by the character span, if any.
fn token_range(tokens: &[Token], start: usize, end: usize) -> Option<(usize, usize)> {
    let first = tokens.iter().position(|t| t.end > start && t.start < end)?;
    let last = tokens[first..]
        .iter()
        .take_while(|t| t.start < end)
        .count()
        + first;
    Some((first, last))
}

fn check_tokens(tokens: &[Token]) -> Result<()> {
    for w in tokens.windows(2) {
        if w[1].start < w[0].end {
            return Err(Error::InvalidArgument(format!(
                "tokens out of order at char {}",
                w[1].start
            )));
        }
    }
    Ok(())
}

/// Drops mentions that would collide at token level, keeping the longer one
/// (ties: the earlier one). Mentions covering no token are dropped too.
pub fn normalize_mentions(mut doc: Document, tokens: &[Token]) -> Result<Document> {
    check_tokens(tokens)?;
    let mut order: Vec<usize> = (0..doc.mentions.len()).collect();
    order.sort_by_key(|&i| {
        let m = &doc.mentions[i];
        (std::cmp::Reverse(m.len_chars()), m.start_char, m.end_char)
    });
    let mut taken = vec![false; tokens.len()];
    let mut keep = vec![false; doc.mentions.len()];
    for i in order {
        let m = &doc.mentions[i];
        let Some((a, b)) = token_range(tokens, m.start_char, m.end_char) else {
            warn!(
                "{}: mention [{}, {}) covers no token; dropped",
                doc.doc_id, m.start_char, m.end_char
            );
            continue;
        };
        if taken[a..b].iter().any(|&t| t) {
            warn!(
                "{}: mention [{}, {}) {:?} overlaps a longer mention; dropped",
                doc.doc_id, m.start_char, m.end_char, m.surface
            );
            continue;
        }
        taken[a..b].iter_mut().for_each(|t| *t = true);
        keep[i] = true;
    }
    let mut k = keep.into_iter();
    doc.mentions.retain(|_| k.next().unwrap_or(false));
    doc.mentions.sort_by_key(|m| (m.start_char, m.end_char));
    Ok(doc)
}

/// Converts resolved mentions to IOB tags over `tokens`. Mention boundaries
/// that fall inside a token are widened to the whole token.
pub fn to_iob(doc: &Document, tokens: &[Token]) -> Result<LabeledSequence> {
    check_tokens(tokens)?;
    let mut ranges = Vec::with_capacity(doc.mentions.len());
    for m in &doc.mentions {
        match token_range(tokens, m.start_char, m.end_char) {
            Some((a, b)) => {
                if tokens[a].start < m.start_char || tokens[b - 1].end > m.end_char {
                    warn!(
                        "{}: mention [{}, {}) snapped to token bounds [{}, {})",
                        doc.doc_id, m.start_char, m.end_char, tokens[a].start, tokens[b - 1].end
                    );
                }
                ranges.push((a, b, m));
            }
            None => warn!(
                "{}: mention [{}, {}) covers no token; skipped",
                doc.doc_id, m.start_char, m.end_char
            ),
        }
    }
    ranges.sort_by_key(|&(a, b, _)| (a, b));
    for w in ranges.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::Overlap {
                doc_id: doc.doc_id.clone(),
                a_start: w[0].2.start_char,
                a_end: w[0].2.end_char,
                b_start: w[1].2.start_char,
                b_end: w[1].2.end_char,
            });
        }
    }
    let mut tags = vec!["O".to_string(); tokens.len()];
    for (a, b, m) in ranges {
        let label = m.label();
        tags[a] = format!("B-{label}");
        for t in &mut tags[a + 1..b] {
            *t = format!("I-{label}");
        }
    }
    Ok(LabeledSequence {
        doc_id: doc.doc_id.clone(),
        tokens: tokens.iter().map(|t| t.text.clone()).collect(),
        spans: tokens.iter().map(|t| (t.start, t.end)).collect(),
        tags,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SentenceRule {
    /// Break after `.`, `!` or `?` tokens.
    Punctuation,
    /// Break where the source text has a newline between tokens.
    Newline,
    /// Keep the whole document as one sequence.
    Document,
}

/// Splits a document-level sequence into sentences. Never breaks inside an entity.
pub fn split_sentences(seq: &LabeledSequence, text: &str, rule: SentenceRule) -> Vec<LabeledSequence> {
    let n = seq.len();
    if n == 0 {
        return Vec::new();
    }
    let chars: Vec<char> = match rule {
        SentenceRule::Newline => text.chars().collect(),
        _ => Vec::new(),
    };
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..n {
        let last = i + 1 == n;
        let brk = !last
            && !seq.tags[i + 1].starts_with("I-")
            && match rule {
                SentenceRule::Punctuation => matches!(seq.tokens[i].as_str(), "." | "!" | "?"),
                SentenceRule::Newline => {
                    chars[seq.spans[i].1..seq.spans[i + 1].0].contains(&'\n')
                }
                SentenceRule::Document => false,
            };
        if brk || last {
            out.push(LabeledSequence {
                doc_id: seq.doc_id.clone(),
                tokens: seq.tokens[start..=i].to_vec(),
                spans: seq.spans[start..=i].to_vec(),
                tags: seq.tags[start..=i].to_vec(),
            });
            start = i + 1;
        }
    }
    out
}
