//! Strict entity-level evaluation and error analysis.
//!
//! A predicted entity is a true positive only when its token span and its
//! label both equal a gold entity's. Partial errors are then sorted into the
//! categories of [`ErrorBreakdown`].

mod compare;
mod errors;
mod report;

pub use compare::{compare_models, Disagreement};
pub use errors::{classify_errors, error_pairs, ErrorBreakdown, ErrorCategory, ErrorPair};
pub use report::{align_conll, evaluate, render_table, AlignedSentence, EvalReport};

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Entity {
    pub doc_id: String,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub label: String,
}

impl Entity {
    pub fn new(doc_id: impl Into<String>, start: usize, end: usize, label: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            start,
            end,
            label: label.into(),
        }
    }

    pub fn same_span(&self, other: &Entity) -> bool {
        self.doc_id == other.doc_id && self.start == other.start && self.end == other.end
    }

    /// Shared token count with `other` (0 across documents).
    pub fn overlap(&self, other: &Entity) -> usize {
        if self.doc_id != other.doc_id {
            return 0;
        }
        self.end.min(other.end).saturating_sub(self.start.max(other.start))
    }
}

/// Entities of a set of documents; the ids matter for model comparison.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntitySet {
    pub doc_ids: BTreeSet<String>,
    pub entities: Vec<Entity>,
}

enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

fn parse_tag(tag: &str) -> Result<Tag<'_>> {
    if tag == "O" {
        return Ok(Tag::Outside);
    }
    match tag.split_once('-') {
        Some(("B", t)) if !t.is_empty() => Ok(Tag::Begin(t)),
        Some(("I", t)) if !t.is_empty() => Ok(Tag::Inside(t)),
        _ => Err(Error::InvalidTag(tag.to_string())),
    }
}

/// Maximal `B-t I-t*` runs. An `I-t` that does not continue a `t` entity
/// opens a new one.
pub fn decode_entities<S: AsRef<str>>(tags: &[S], doc_id: &str) -> Result<Vec<Entity>> {
    let mut out = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match parse_tag(tag.as_ref())? {
            Tag::Outside => {
                if let Some((s, l)) = open.take() {
                    out.push(Entity::new(doc_id, s, i, l));
                }
            }
            Tag::Begin(t) => {
                if let Some((s, l)) = open.replace((i, t)) {
                    out.push(Entity::new(doc_id, s, i, l));
                }
            }
            Tag::Inside(t) => match open {
                Some((_, l)) if l == t => {}
                _ => {
                    if let Some((s, l)) = open.replace((i, t)) {
                        out.push(Entity::new(doc_id, s, i, l));
                    }
                }
            },
        }
    }
    if let Some((s, l)) = open {
        out.push(Entity::new(doc_id, s, tags.len(), l));
    }
    Ok(out)
}

/// Precision, recall and F1 with their counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, predicted: usize, gold: usize) -> Self {
        let precision = if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 };
        let recall = if gold > 0 { tp as f64 / gold as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            true_positives: tp,
            predicted,
            gold,
            precision,
            recall,
            f1,
        }
    }
}

/// Exact `(span, label)` matches paired one-to-one.
pub fn count_exact(gold: &[Entity], pred: &[Entity]) -> usize {
    let mut pool: HashMap<&Entity, usize> = HashMap::new();
    for g in gold {
        *pool.entry(g).or_default() += 1;
    }
    let mut tp = 0;
    for p in pred {
        if let Some(n) = pool.get_mut(p) {
            if *n > 0 {
                *n -= 1;
                tp += 1;
            }
        }
    }
    tp
}

/// Micro-averaged strict precision, recall, F1.
pub fn strict_score(gold: &[Entity], pred: &[Entity]) -> Prf {
    Prf::from_counts(count_exact(gold, pred), pred.len(), gold.len())
}
