//! `train` and `cv`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use nerkit::corpus::{read_conll, write_conll, ConllDocument};
use nerkit::eval::{evaluate, render_table};
use nerkit::models::{load_pretrained_embeddings, Resources, Tagger};
use nerkit::numerics::checkpoint::Checkpoint;
use nerkit::tokenize::SubwordVocab;
use nerkit::training::{kfold_cv, predict_all, sentence_entities, train_with_log, Example};

use crate::config::RunConfig;

pub fn read_documents(path: &Path) -> anyhow::Result<Vec<ConllDocument>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_conll(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

/// `docs` with the tags replaced sentence by sentence.
pub fn with_tags(docs: &[ConllDocument], tags: Vec<Vec<String>>) -> Vec<ConllDocument> {
    let mut tags = tags.into_iter();
    docs.iter()
        .map(|d| ConllDocument {
            doc_id: d.doc_id.clone(),
            sentences: d
                .sentences
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    s.tags = tags.next().expect("one tag sequence per sentence");
                    s
                })
                .collect(),
        })
        .collect()
}

pub fn write_conll_file(path: &Path, docs: &[ConllDocument]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_conll(&mut w, docs)?;
    w.flush()?;
    Ok(())
}

fn resources(cfg: &RunConfig) -> anyhow::Result<Resources> {
    let open = |p: &PathBuf| File::open(p).map(BufReader::new).with_context(|| format!("opening {}", p.display()));
    let vocab = |p: &Option<PathBuf>| -> anyhow::Result<Option<SubwordVocab>> {
        p.as_ref()
            .map(|p| SubwordVocab::from_reader(open(p)?).with_context(|| format!("reading {}", p.display())))
            .transpose()
    };
    Ok(Resources {
        pretrained: cfg
            .paths
            .embeddings
            .as_ref()
            .map(|p| load_pretrained_embeddings(open(p)?).with_context(|| format!("reading {}", p.display())))
            .transpose()?,
        vocab_a: vocab(&cfg.paths.vocab)?,
        vocab_b: vocab(&cfg.paths.second_vocab)?,
    })
}

fn prepare_run_dir(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.toml"), &cfg.source)?;
    fs::write(dir.join("resolved_config.json"), cfg.canonical_json() + "\n")?;
    Ok(dir)
}

#[derive(Serialize)]
struct Summary {
    best_epoch: usize,
    best_dev_precision: f64,
    best_dev_recall: f64,
    best_dev_f1: f64,
    final_loss: f64,
    steps: usize,
    evaluated_on: String,
}

pub fn train(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let train_docs = read_documents(&cfg.paths.train)?;
    let dev_docs = cfg.paths.dev.as_deref().map(read_documents).transpose()?;
    let test_docs = cfg.paths.test.as_deref().map(read_documents).transpose()?;
    let res = resources(cfg)?;
    let dir = prepare_run_dir(cfg)?;

    let train = Example::from_conll(&train_docs);
    let dev = dev_docs.as_deref().map(Example::from_conll);
    let mut log = BufWriter::new(File::create(dir.join("train_log.jsonl"))?);
    let outcome = train_with_log(&train, dev.as_deref(), &cfg.train, &res, &mut log)?;
    log.flush()?;

    let ckpt = outcome.best.to_checkpoint(cfg.train.seed, &cfg.canonical_json())?;
    let mut w = BufWriter::new(File::create(dir.join("checkpoint.bin"))?);
    ckpt.write_to(&mut w)?;
    w.flush()?;

    let (name, docs) = match (&test_docs, &dev_docs) {
        (Some(t), _) => ("test", t),
        (None, Some(d)) => ("dev", d),
        (None, None) => ("train", &train_docs),
    };
    let report = predict_and_report(&outcome.best, docs, &dir)?;
    print!("{report}");

    let summary = Summary {
        best_epoch: outcome.best_epoch,
        best_dev_precision: outcome.best_dev.precision,
        best_dev_recall: outcome.best_dev.recall,
        best_dev_f1: outcome.best_dev.f1,
        final_loss: outcome.final_loss,
        steps: outcome.steps,
        evaluated_on: name.to_string(),
    };
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!("run directory: {}", dir.display());
    Ok(dir)
}

/// Writes `predictions.conll`, `report.json` and `report.txt`; returns the table.
fn predict_and_report(tagger: &Tagger, docs: &[ConllDocument], dir: &Path) -> anyhow::Result<String> {
    let examples = Example::from_conll(docs);
    let pred = predict_all(tagger, &examples)?;
    let gold: Vec<Vec<String>> = examples.iter().map(|e| e.tags.clone()).collect();
    let report = evaluate(&sentence_entities(&gold)?, &sentence_entities(&pred)?);
    write_conll_file(&dir.join("predictions.conll"), &with_tags(docs, pred))?;
    let table = render_table(&report);
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(dir.join("report.txt"), &table)?;
    Ok(table)
}

pub fn cross_validate(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    let docs = read_documents(&cfg.paths.train)?;
    let res = resources(cfg)?;
    let dir = prepare_run_dir(cfg)?;
    let result = kfold_cv(&Example::from_conll(&docs), &cfg.cv.grid(), &cfg.train, &res)?;
    fs::write(dir.join("cv.json"), serde_json::to_string_pretty(&result)? + "\n")?;
    let mut ranked: Vec<_> = result.scores.iter().collect();
    ranked.sort_by(|a, b| b.mean_f1.total_cmp(&a.mean_f1));
    println!("{:>6} {:>10} {:>7} {:>8}", "batch", "lr", "epochs", "mean F1");
    for s in ranked {
        println!("{:>6} {:>10.1e} {:>7} {:>8.4}", s.point.batch_size, s.point.peak_lr, s.point.epochs, s.mean_f1);
    }
    let c = result.chosen;
    println!("chosen: batch_size = {}, peak_lr = {:e}, epochs = {}", c.batch_size, c.peak_lr, c.epochs);
    println!("run directory: {}", dir.display());
    Ok(dir)
}

pub fn load_tagger(path: &Path) -> anyhow::Result<Tagger> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let ckpt = Checkpoint::read_from(&mut r).with_context(|| format!("reading {}", path.display()))?;
    Ok(Tagger::from_checkpoint(&ckpt)?)
}
