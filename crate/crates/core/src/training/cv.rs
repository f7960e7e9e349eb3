use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, Example, TrainConfig};
use crate::error::{Error, Result};
use crate::models::Resources;
use crate::numerics::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub batch_size: usize,
    pub peak_lr: f64,
    pub epochs: usize,
}

impl GridPoint {
    /// Batch sizes {16, 32} × learning rates {2e-5, 3e-5, 5e-5, 1e-4} × epochs 1..=10.
    pub fn fine_tuning_grid() -> Vec<GridPoint> {
        let mut out = Vec::new();
        for batch_size in [16, 32] {
            for peak_lr in [2e-5, 3e-5, 5e-5, 1e-4] {
                for epochs in 1..=10 {
                    out.push(GridPoint { batch_size, peak_lr, epochs });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub point: GridPoint,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub scores: Vec<GridScore>,
    pub chosen: GridPoint,
}

/// Shuffles the distinct document ids (in first-appearance order) with the
/// `folds` stream and deals them round-robin into `k` folds.
pub fn fold_assignment(doc_ids: &[String], k: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    let mut seen = BTreeSet::new();
    let mut docs: Vec<String> = doc_ids.iter().filter(|d| seen.insert(d.as_str())).cloned().collect();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > docs.len() {
        return Err(Error::InvalidArgument(format!("{k} folds but only {} documents", docs.len())));
    }
    docs.shuffle(&mut stream(seed, "folds"));
    let mut folds = vec![Vec::new(); k];
    for (i, d) in docs.into_iter().enumerate() {
        folds[i % k].push(d);
    }
    Ok(folds)
}

/// Orders better points first: higher mean F1, then fewer epochs, then smaller lr.
fn rank(a: &GridScore, b: &GridScore) -> Ordering {
    b.mean_f1
        .total_cmp(&a.mean_f1)
        .then(a.point.epochs.cmp(&b.point.epochs))
        .then(a.point.peak_lr.total_cmp(&b.point.peak_lr))
        .then(a.point.batch_size.cmp(&b.point.batch_size))
}

/// Trains every grid point once per held-out fold and scores the final
/// model on that fold. Runs are independent and execute in parallel.
pub fn kfold_cv(examples: &[Example], grid: &[GridPoint], config: &TrainConfig, resources: &Resources) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    let ids: Vec<String> = examples.iter().map(|e| e.doc_id.clone()).collect();
    let folds = fold_assignment(&ids, config.folds, config.seed)?;
    let fold_of: HashMap<&str, usize> = folds
        .iter()
        .enumerate()
        .flat_map(|(f, docs)| docs.iter().map(move |d| (d.as_str(), f)))
        .collect();
    let split = |f: usize| -> (Vec<Example>, Vec<Example>) {
        examples.iter().cloned().partition(|e| fold_of[e.doc_id.as_str()] != f)
    };
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|p| (0..folds.len()).map(move |f| (p, f))).collect();
    let f1s = jobs
        .par_iter()
        .map(|&(p, f)| {
            let (train_set, held_out) = split(f);
            let mut cfg = config.clone();
            cfg.optimizer.batch_size = grid[p].batch_size;
            cfg.optimizer.peak_lr = grid[p].peak_lr;
            cfg.optimizer.epochs = grid[p].epochs;
            let out = train(&train_set, Some(&held_out), &cfg, resources)?;
            Ok(out.log.last().expect("epochs >= 1").dev_f1)
        })
        .collect::<Result<Vec<f64>>>()?;
    let scores: Vec<GridScore> = grid
        .iter()
        .enumerate()
        .map(|(p, point)| {
            let fold_f1 = f1s[p * folds.len()..(p + 1) * folds.len()].to_vec();
            GridScore {
                point: *point,
                mean_f1: fold_f1.iter().sum::<f64>() / fold_f1.len() as f64,
                fold_f1,
            }
        })
        .collect();
    let chosen = scores.iter().min_by(|a, b| rank(a, b)).expect("non-empty grid").point;
    Ok(GridResult { scores, chosen })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn score(f1: f64, epochs: usize, lr: f64) -> GridScore {
        GridScore {
            point: GridPoint { batch_size: 16, peak_lr: lr, epochs },
            fold_f1: vec![f1],
            mean_f1: f1,
        }
    }

    #[test]
    fn two_folds_over_four_docs() {
        let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let folds = fold_assignment(&ids, 2, 3).unwrap();
        assert_eq!(folds.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2]);
        let mut all: Vec<String> = folds.concat();
        all.sort();
        assert_eq!(all, ids);
        assert_eq!(folds, fold_assignment(&ids, 2, 3).unwrap());
    }

    #[test]
    fn too_many_folds() {
        let ids = vec!["a".to_string(), "a".to_string(), "b".to_string()];
        assert!(fold_assignment(&ids, 3, 0).is_err());
        assert!(fold_assignment(&ids, 1, 0).is_err());
    }

    #[test]
    fn ties_prefer_fewer_epochs_then_smaller_lr() {
        let mut v = [score(0.8, 3, 5e-5), score(0.8, 2, 1e-4), score(0.8, 2, 3e-5), score(0.7, 1, 2e-5)];
        v.sort_by(rank);
        assert_eq!(v[0].point, GridPoint { batch_size: 16, peak_lr: 3e-5, epochs: 2 });
    }

    #[test]
    fn grid_has_eighty_points() {
        assert_eq!(GridPoint::fine_tuning_grid().len(), 80);
    }

    proptest! {
        #[test]
        fn folds_partition_documents(n in 2usize..40, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let ids: Vec<String> = (0..n).map(|i| format!("d{}", i % n)).collect();
            let folds = fold_assignment(&ids, k, seed).unwrap();
            let mut all = folds.concat();
            prop_assert_eq!(all.len(), n);
            all.sort();
            all.dedup();
            prop_assert_eq!(all.len(), n);
            prop_assert!(folds.iter().all(|f| !f.is_empty()));
        }
    }
}
