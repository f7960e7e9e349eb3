use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Entity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    TruePositive,
    RightSpanWrongLabel,
    RightLabelOverlappingSpan,
    WrongLabelOverlappingSpan,
    CompleteFalsePositive,
    CompleteFalseNegative,
}

/// Counts per category. Each prediction lands in exactly one of the first
/// five fields; each gold entity is consumed by a true positive, by one
/// partial match, or counted as a complete false negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub true_positive: usize,
    pub right_span_wrong_label: usize,
    pub right_label_overlapping_span: usize,
    pub wrong_label_overlapping_span: usize,
    pub complete_false_positive: usize,
    pub complete_false_negative: usize,
}

impl ErrorBreakdown {
    pub fn partial(&self) -> usize {
        self.right_span_wrong_label + self.right_label_overlapping_span + self.wrong_label_overlapping_span
    }

    /// Number of predictions accounted for.
    pub fn predicted(&self) -> usize {
        self.true_positive + self.partial() + self.complete_false_positive
    }

    /// Number of gold entities accounted for.
    pub fn gold(&self) -> usize {
        self.true_positive + self.partial() + self.complete_false_negative
    }

    /// The five error counts in taxonomy order.
    pub fn error_counts(&self) -> [usize; 5] {
        [
            self.right_span_wrong_label,
            self.right_label_overlapping_span,
            self.wrong_label_overlapping_span,
            self.complete_false_positive,
            self.complete_false_negative,
        ]
    }

    fn bump(&mut self, c: ErrorCategory) {
        match c {
            ErrorCategory::TruePositive => self.true_positive += 1,
            ErrorCategory::RightSpanWrongLabel => self.right_span_wrong_label += 1,
            ErrorCategory::RightLabelOverlappingSpan => self.right_label_overlapping_span += 1,
            ErrorCategory::WrongLabelOverlappingSpan => self.wrong_label_overlapping_span += 1,
            ErrorCategory::CompleteFalsePositive => self.complete_false_positive += 1,
            ErrorCategory::CompleteFalseNegative => self.complete_false_negative += 1,
        }
    }
}

/// One assignment made by the error matcher.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorPair {
    pub category: ErrorCategory,
    pub gold: Option<Entity>,
    pub pred: Option<Entity>,
}

/// One-to-one assignment of predictions to gold entities.
///
/// Exact matches are removed first. The rest are matched greedily in three
/// rounds: same span with a different label, then overlapping span with the
/// same label, then overlapping span with a different label. Within a round,
/// candidate pairs are taken by largest token overlap, then leftmost gold,
/// then leftmost prediction. Leftovers are complete false positives or
/// complete false negatives. Input order does not affect the result.
pub fn error_pairs(gold: &[Entity], pred: &[Entity]) -> Vec<ErrorPair> {
    let mut by_doc: BTreeMap<&str, (Vec<&Entity>, Vec<&Entity>)> = BTreeMap::new();
    for g in gold {
        by_doc.entry(&g.doc_id).or_default().0.push(g);
    }
    for p in pred {
        by_doc.entry(&p.doc_id).or_default().1.push(p);
    }
    let mut out = Vec::new();
    for (_, (mut g, mut p)) in by_doc {
        g.sort();
        p.sort();
        match_document(&g, &p, &mut out);
    }
    out
}

fn match_document(gold: &[&Entity], pred: &[&Entity], out: &mut Vec<ErrorPair>) {
    let mut g_used = vec![false; gold.len()];
    let mut p_used = vec![false; pred.len()];

    // exact
    for (pi, p) in pred.iter().enumerate() {
        if let Some(gi) = (0..gold.len()).find(|&gi| !g_used[gi] && gold[gi] == *p) {
            g_used[gi] = true;
            p_used[pi] = true;
            out.push(ErrorPair {
                category: ErrorCategory::TruePositive,
                gold: Some(gold[gi].clone()),
                pred: Some((*p).clone()),
            });
        }
    }

    type Rule = fn(&Entity, &Entity) -> bool;
    let rounds: [(ErrorCategory, Rule); 3] = [
        (ErrorCategory::RightSpanWrongLabel, |g, p| {
            g.same_span(p) && g.label != p.label
        }),
        (ErrorCategory::RightLabelOverlappingSpan, |g, p| {
            g.overlap(p) > 0 && g.label == p.label
        }),
        (ErrorCategory::WrongLabelOverlappingSpan, |g, p| {
            g.overlap(p) > 0 && g.label != p.label
        }),
    ];
    for (category, rule) in rounds {
        let mut cands: Vec<(usize, usize, usize)> = Vec::new();
        for (gi, g) in gold.iter().enumerate() {
            if g_used[gi] {
                continue;
            }
            for (pi, p) in pred.iter().enumerate() {
                if !p_used[pi] && rule(g, p) {
                    cands.push((g.overlap(p), gi, pi));
                }
            }
        }
        // gold and pred are sorted, so index order is positional order
        cands.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, gi, pi) in cands {
            if g_used[gi] || p_used[pi] {
                continue;
            }
            g_used[gi] = true;
            p_used[pi] = true;
            out.push(ErrorPair {
                category,
                gold: Some(gold[gi].clone()),
                pred: Some(pred[pi].clone()),
            });
        }
    }

    for (pi, p) in pred.iter().enumerate() {
        if !p_used[pi] {
            out.push(ErrorPair {
                category: ErrorCategory::CompleteFalsePositive,
                gold: None,
                pred: Some((*p).clone()),
            });
        }
    }
    for (gi, g) in gold.iter().enumerate() {
        if !g_used[gi] {
            out.push(ErrorPair {
                category: ErrorCategory::CompleteFalseNegative,
                gold: Some((*g).clone()),
                pred: None,
            });
        }
    }
}

pub fn classify_errors(gold: &[Entity], pred: &[Entity]) -> ErrorBreakdown {
    let mut b = ErrorBreakdown::default();
    for pair in error_pairs(gold, pred) {
        b.bump(pair.category);
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(s: usize, t: usize, l: &str) -> Entity {
        Entity::new("d", s, t, l)
    }

    #[test]
    fn weaker_than_usual() {
        // "patient feeling weaker than usual": gold 2..5 problem, pred 2..3 problem
        let b = classify_errors(&[e(2, 5, "problem")], &[e(2, 3, "problem")]);
        assert_eq!(b.right_label_overlapping_span, 1);
        assert_eq!(b.predicted(), 1);
        assert_eq!(b.gold(), 1);
    }

    #[test]
    fn region_of_the_brain() {
        // "this region of the brain": gold 1..5 spatial concept, pred 4..5 anatomical structure
        let b = classify_errors(&[e(1, 5, "spatial")], &[e(4, 5, "anatomical")]);
        assert_eq!(b.wrong_label_overlapping_span, 1);
    }

    #[test]
    fn missed_entity() {
        let b = classify_errors(&[e(0, 1, "t")], &[]);
        assert_eq!(b.complete_false_negative, 1);
        assert_eq!(b.gold(), 1);
    }

    #[test]
    fn one_of_each() {
        let gold = [e(0, 2, "a"), e(3, 6, "a"), e(7, 9, "a"), e(20, 21, "b")];
        let pred = [e(0, 2, "b"), e(3, 5, "a"), e(8, 9, "b"), e(12, 13, "a")];
        let b = classify_errors(&gold, &pred);
        assert_eq!(b.error_counts(), [1, 1, 1, 1, 1]);
        assert_eq!(b.true_positive, 0);
    }

    #[test]
    fn greedy_prefers_larger_overlap() {
        // one prediction straddles two gold entities of its label
        let gold = [e(0, 2, "a"), e(2, 6, "a")];
        let pred = [e(1, 4, "a")];
        let pairs = error_pairs(&gold, &pred);
        let partial = pairs
            .iter()
            .find(|p| p.category == ErrorCategory::RightLabelOverlappingSpan)
            .unwrap();
        assert_eq!(partial.gold.as_ref().unwrap(), &gold[1]);
        assert_eq!(classify_errors(&gold, &pred).complete_false_negative, 1);
    }

    fn arb_entities(n: usize) -> impl Strategy<Value = Vec<Entity>> {
        proptest::collection::vec((0usize..2, 0usize..12, 1usize..4, 0usize..3), 0..n).prop_map(|v| {
            v.into_iter()
                .map(|(d, s, len, l)| Entity::new(format!("d{d}"), s, s + len, ["a", "b", "c"][l]))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn accounting_identities(gold in arb_entities(8), pred in arb_entities(8)) {
            let b = classify_errors(&gold, &pred);
            prop_assert_eq!(b.predicted(), pred.len());
            prop_assert_eq!(b.gold(), gold.len());
            prop_assert_eq!(b.true_positive, super::super::count_exact(&gold, &pred));
        }

        #[test]
        fn prediction_order_irrelevant(gold in arb_entities(8), pred in arb_entities(8)) {
            let mut rev = pred.clone();
            rev.reverse();
            prop_assert_eq!(classify_errors(&gold, &pred), classify_errors(&gold, &rev));
        }
    }
}
