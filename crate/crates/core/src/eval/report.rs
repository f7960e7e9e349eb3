use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{classify_errors, count_exact, error_pairs, strict_score, Entity, ErrorBreakdown, ErrorCategory, Prf};
use crate::corpus::ConllLine;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro: Prf,
    pub per_type: BTreeMap<String, Prf>,
    pub errors: ErrorBreakdown,
    /// gold label -> predicted label -> count, over wrong-label partial errors.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
}

pub fn evaluate(gold: &[Entity], pred: &[Entity]) -> EvalReport {
    let labels: BTreeSet<&str> = gold.iter().chain(pred).map(|e| e.label.as_str()).collect();
    let per_type = labels
        .into_iter()
        .map(|l| {
            let g: Vec<Entity> = gold.iter().filter(|e| e.label == l).cloned().collect();
            let p: Vec<Entity> = pred.iter().filter(|e| e.label == l).cloned().collect();
            (l.to_string(), Prf::from_counts(count_exact(&g, &p), p.len(), g.len()))
        })
        .collect();
    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for pair in error_pairs(gold, pred) {
        if matches!(
            pair.category,
            ErrorCategory::RightSpanWrongLabel | ErrorCategory::WrongLabelOverlappingSpan
        ) {
            let (g, p) = (pair.gold.expect("paired"), pair.pred.expect("paired"));
            *confusion.entry(g.label).or_default().entry(p.label).or_default() += 1;
        }
    }
    EvalReport {
        micro: strict_score(gold, pred),
        per_type,
        errors: classify_errors(gold, pred),
        confusion,
    }
}

/// A sentence present in both gold and predicted files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignedSentence {
    pub id: String,
    pub first_line: usize,
    pub tokens: Vec<String>,
    pub gold_tags: Vec<String>,
    pub pred_tags: Vec<String>,
}

fn trim_trailing_blank(lines: &[ConllLine]) -> &[ConllLine] {
    let n = lines.len() - lines.iter().rev().take_while(|l| **l == ConllLine::Blank).count();
    &lines[..n]
}

/// Pairs up two CoNLL files line by line. Sentence and document boundaries
/// and tokens must agree exactly; the first disagreement is reported with its
/// 1-based line number.
pub fn align_conll(gold: &[ConllLine], pred: &[ConllLine]) -> Result<Vec<AlignedSentence>> {
    let (gold, pred) = (trim_trailing_blank(gold), trim_trailing_blank(pred));
    let mismatch = |i: usize, msg: String| Error::Parse { line: i + 1, msg };
    let mut out = Vec::new();
    let mut cur: Option<AlignedSentence> = None;
    let flush = |out: &mut Vec<AlignedSentence>, cur: &mut Option<AlignedSentence>| {
        if let Some(s) = cur.take() {
            out.push(s);
        }
    };
    for i in 0..gold.len().max(pred.len()) {
        match (gold.get(i), pred.get(i)) {
            (Some(ConllLine::Blank), Some(ConllLine::Blank))
            | (Some(ConllLine::DocStart), Some(ConllLine::DocStart)) => flush(&mut out, &mut cur),
            (Some(ConllLine::Token { token: gt, tag: gtag }), Some(ConllLine::Token { token: pt, tag: ptag })) => {
                if gt != pt {
                    return Err(mismatch(i, format!("token {gt:?} in gold but {pt:?} in prediction")));
                }
                let n = out.len();
                let s = cur.get_or_insert_with(|| AlignedSentence {
                    id: format!("s{n}"),
                    first_line: i + 1,
                    tokens: Vec::new(),
                    gold_tags: Vec::new(),
                    pred_tags: Vec::new(),
                });
                s.tokens.push(gt.clone());
                s.gold_tags.push(gtag.clone());
                s.pred_tags.push(ptag.clone());
            }
            (None, _) => return Err(mismatch(i, "prediction file is longer than gold".into())),
            (_, None) => return Err(mismatch(i, "prediction file ends early".into())),
            (Some(g), Some(p)) => {
                return Err(mismatch(i, format!("boundary mismatch: gold {g:?}, prediction {p:?}")))
            }
        }
    }
    flush(&mut out, &mut cur);
    Ok(out)
}

pub fn render_table(report: &EvalReport) -> String {
    let width = report
        .per_type
        .keys()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max("micro".len());
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>6}  {:>6}  {:>6}  {:>9}  {:>6}  {:>6}",
        "type", "tp", "pred", "gold", "precision", "recall", "f1"
    );
    let mut row = |name: &str, p: &Prf| {
        let _ = writeln!(
            s,
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>9.4}  {:>6.4}  {:>6.4}",
            name, p.true_positives, p.predicted, p.gold, p.precision, p.recall, p.f1
        );
    };
    for (t, p) in &report.per_type {
        row(t, p);
    }
    row("micro", &report.micro);
    let e = &report.errors;
    let _ = writeln!(s);
    for (name, n) in [
        ("true positive", e.true_positive),
        ("right span, wrong label", e.right_span_wrong_label),
        ("right label, overlapping span", e.right_label_overlapping_span),
        ("wrong label, overlapping span", e.wrong_label_overlapping_span),
        ("complete false positive", e.complete_false_positive),
        ("complete false negative", e.complete_false_negative),
    ] {
        let _ = writeln!(s, "{name:<30}  {n:>6}");
    }
    s
}
