//! `eval` and `compare`.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use anyhow::Context;

use nerkit::corpus::{read_conll_lines, ConllLine};
use nerkit::eval::{align_conll, compare_models, decode_entities, evaluate, render_table, AlignedSentence, Entity, EntitySet};

fn lines(path: &Path) -> anyhow::Result<Vec<ConllLine>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_conll_lines(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn aligned(gold: &Path, pred: &Path) -> anyhow::Result<Vec<AlignedSentence>> {
    align_conll(&lines(gold)?, &lines(pred)?).with_context(|| format!("{} does not line up with {}", pred.display(), gold.display()))
}

fn entities(sents: &[AlignedSentence], pred: bool) -> anyhow::Result<EntitySet> {
    let mut set = EntitySet::default();
    for s in sents {
        let tags = if pred { &s.pred_tags } else { &s.gold_tags };
        let which = if pred { "prediction" } else { "gold" };
        set.entities
            .extend(decode_entities(tags, &s.id).with_context(|| format!("{which} sentence at line {}", s.first_line))?);
        set.doc_ids.insert(s.id.clone());
    }
    Ok(set)
}

pub fn eval(gold: &Path, pred: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let sents = aligned(gold, pred)?;
    let report = evaluate(&entities(&sents, false)?.entities, &entities(&sents, true)?.entities);
    let table = render_table(&report);
    print!("{table}");
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        fs::write(dir.join("report.txt"), &table)?;
    }
    Ok(())
}

fn describe(e: &Entity, sents: &[AlignedSentence]) -> String {
    let s = sents.iter().find(|s| s.id == e.doc_id).expect("entity of an aligned sentence");
    format!("line {}\t{}\t{}", s.first_line + e.start, e.label, s.tokens[e.start..e.end].join(" "))
}

pub fn compare(gold: &Path, pred_a: &Path, pred_b: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let a = aligned(gold, pred_a)?;
    let b = aligned(gold, pred_b)?;
    let d = compare_models(&entities(&a, false)?, &entities(&a, true)?, &entities(&b, true)?)?;
    let (ao, bo, both, neither) = d.counts();
    let mut text = format!("only A: {ao}\nonly B: {bo}\nboth: {both}\nneither: {neither}\n");
    for (title, list) in [("only A", &d.a_only), ("only B", &d.b_only)] {
        text.push_str(&format!("\n# {title}\n"));
        for e in list {
            text.push_str(&describe(e, &a));
            text.push('\n');
        }
    }
    print!("{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("disagreement.json"), serde_json::to_string_pretty(&d)? + "\n")?;
        fs::write(dir.join("disagreement.txt"), &text)?;
    }
    Ok(())
}
