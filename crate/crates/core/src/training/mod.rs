//! Batching, the training loop, and cross-validated grid search.

mod batch;
mod cv;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use batch::{make_batches, Batch};
pub use cv::{fold_assignment, kfold_cv, GridPoint, GridResult, GridScore};

use crate::corpus::ConllDocument;
use crate::error::{Error, Result};
use crate::eval::{decode_entities, strict_score, Entity, Prf};
use crate::models::{tag_set, ModelConfig, ModelFamily, Resources, Tagger};
use crate::numerics::optim::ScheduleKind;
use crate::numerics::rng::stream;
use crate::numerics::{Adam, OptimizerConfig, Tape};

/// Global-norm clipping applied to recurrent families when none is configured.
pub const RECURRENT_CLIP_NORM: f64 = 5.0;

/// One labeled sentence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub doc_id: String,
    pub words: Vec<String>,
    pub tags: Vec<String>,
}

impl Example {
    pub fn from_conll(docs: &[ConllDocument]) -> Vec<Example> {
        docs.iter()
            .flat_map(|d| {
                d.sentences.iter().map(|s| Example {
                    doc_id: d.doc_id.clone(),
                    words: s.tokens.clone(),
                    tags: s.tags.clone(),
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Fold count for cross-validation.
    pub folds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::preset(ModelFamily::BilstmCrf)
    }
}

impl TrainConfig {
    /// Family defaults: plain Adam at 0.001 for 10 epochs with batch 32 for
    /// the recurrent tagger; warmup/decay fine-tuning otherwise.
    pub fn preset(family: ModelFamily) -> Self {
        let optimizer = if family.is_recurrent() {
            OptimizerConfig {
                peak_lr: 1e-3,
                epochs: 10,
                batch_size: 32,
                weight_decay: 0.0,
                schedule: ScheduleKind::Constant,
                clip_norm: Some(RECURRENT_CLIP_NORM),
                ..OptimizerConfig::default()
            }
        } else {
            OptimizerConfig::default()
        };
        Self {
            model: ModelConfig { family, ..ModelConfig::default() },
            optimizer,
            seed: 0,
            folds: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.model.validate()?;
        if self.folds < 2 {
            return Err(Error::InvalidArgument(format!("folds must be at least 2, got {}", self.folds)));
        }
        Ok(())
    }

    fn clip_norm(&self) -> Option<f64> {
        self.optimizer
            .clip_norm
            .or(self.model.family.is_recurrent().then_some(RECURRENT_CLIP_NORM))
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    /// Mean per-sentence training loss over the epoch.
    pub loss: f64,
    pub dev_precision: f64,
    pub dev_recall: f64,
    pub dev_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev F1 (earliest on ties).
    pub best: Tagger,
    pub best_epoch: usize,
    pub best_dev: Prf,
    pub log: Vec<EpochLog>,
    pub steps: usize,
    pub final_loss: f64,
}

/// Entities of a set of sentences, each sentence its own scoring unit.
pub fn sentence_entities<S: AsRef<str>>(tag_seqs: &[Vec<S>]) -> Result<Vec<Entity>> {
    let mut out = Vec::new();
    for (i, tags) in tag_seqs.iter().enumerate() {
        out.extend(decode_entities(tags, &format!("s{i}"))?);
    }
    Ok(out)
}

pub fn predict_all(tagger: &Tagger, examples: &[Example]) -> Result<Vec<Vec<String>>> {
    examples.par_iter().map(|e| tagger.predict(&e.words)).collect()
}

/// Strict micro scores of `tagger` on `examples`, with its predictions.
pub fn evaluate_tagger(tagger: &Tagger, examples: &[Example]) -> Result<(Prf, Vec<Vec<String>>)> {
    let pred = predict_all(tagger, examples)?;
    let gold: Vec<Vec<String>> = examples.iter().map(|e| e.tags.clone()).collect();
    let score = strict_score(&sentence_entities(&gold)?, &sentence_entities(&pred)?);
    Ok((score, pred))
}

pub fn train(train: &[Example], dev: Option<&[Example]>, config: &TrainConfig, resources: &Resources) -> Result<TrainOutcome> {
    train_with_log(train, dev, config, resources, &mut std::io::sink())
}

/// Trains for `epochs · ceil(N / batch_size)` optimizer steps, writing one
/// JSON line per epoch to `log`. Without a dev set the training sentences
/// are scored instead.
pub fn train_with_log(
    train: &[Example],
    dev: Option<&[Example]>,
    config: &TrainConfig,
    resources: &Resources,
    log: &mut dyn Write,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("no training sentences".into()));
    }
    let opt = &config.optimizer;
    let tags = tag_set(train.iter().flat_map(|e| e.tags.iter()));
    let sentences: Vec<Vec<String>> = train.iter().map(|e| e.words.clone()).collect();
    let mut tagger = Tagger::build(&config.model, &tags, &sentences, resources, config.seed)?.with_dropout(opt.dropout);
    let mut adam = Adam::new(opt, &tagger.store);
    let dev = dev.unwrap_or(train);

    let lengths: Vec<usize> = train.iter().map(|e| e.words.len()).collect();
    let per_epoch = train.len().div_ceil(opt.batch_size);
    let total = opt.epochs * per_epoch;
    let clip = config.clip_norm();

    let mut step = 0;
    let mut lr = 0.0;
    let mut records = Vec::with_capacity(opt.epochs);
    let mut best: Option<(Tagger, usize, Prf)> = None;
    let mut final_loss = 0.0;
    for epoch in 1..=opt.epochs {
        let mut epoch_loss = 0.0;
        for b in make_batches(&lengths, opt.batch_size, config.seed, epoch)? {
            step += 1;
            let mut tape = Tape::train(stream(config.seed, &format!("dropout/{step}")));
            let mut parts = Vec::with_capacity(b.indices.len());
            for &i in &b.indices {
                parts.push(tagger.loss(&mut tape, &train[i].words, &train[i].tags)?);
            }
            let mut loss = parts[0];
            for p in &parts[1..] {
                loss = tape.add(loss, *p)?;
            }
            let value = tape.value(loss).item()?;
            if !value.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss {value} at epoch {epoch}, step {step}"
                )));
            }
            epoch_loss += value;
            let mut grads = tape.backward(loss, &tagger.store)?;
            if let Some(max) = clip {
                grads.clip_global_norm(max);
            }
            lr = opt.lr_at(step, total)?;
            adam.step(&mut tagger.store, &grads, lr)?;
        }
        final_loss = epoch_loss / train.len() as f64;
        let (score, _) = evaluate_tagger(&tagger, dev)?;
        let rec = EpochLog {
            epoch,
            step,
            lr,
            loss: final_loss,
            dev_precision: score.precision,
            dev_recall: score.recall,
            dev_f1: score.f1,
        };
        log::info!("epoch {epoch}: loss {final_loss:.6} dev F1 {:.4}", score.f1);
        serde_json::to_writer(&mut *log, &rec)?;
        writeln!(log)?;
        records.push(rec);
        if best.as_ref().is_none_or(|(_, _, b)| score.f1 > b.f1) {
            best = Some((tagger.clone(), epoch, score));
        }
    }
    let (best, best_epoch, best_dev) = best.expect("epochs >= 1");
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_dev,
        log: records,
        steps: step,
        final_loss,
    })
}
