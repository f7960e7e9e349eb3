use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::numerics::rng::stream;

/// Sentence indices of one batch plus their padding masks at the batch's
/// longest length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub max_len: usize,
    pub mask: Vec<Vec<bool>>,
}

/// Shuffles sentence indices with a stream keyed by `epoch` and cuts them
/// into batches of at most `batch_size`.
pub fn make_batches(lengths: &[usize], batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(&mut stream(seed, &format!("shuffle/{epoch}")));
    Ok(order
        .chunks(batch_size)
        .map(|idx| {
            let max_len = idx.iter().map(|&i| lengths[i]).max().unwrap_or(0);
            Batch {
                indices: idx.to_vec(),
                max_len,
                mask: idx.iter().map(|&i| (0..max_len).map(|t| t < lengths[i]).collect()).collect(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{tag_set, BiLstmConfig, EmbeddingConfig, ModelConfig, Resources, Tagger};
    use crate::numerics::Tape;

    #[test]
    fn small_corpus_is_one_batch() {
        let b = make_batches(&[3; 10], 32, 1, 1).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].indices.len(), 10);
    }

    #[test]
    fn deterministic_and_epoch_dependent() {
        let lens: Vec<usize> = (1..=20).collect();
        assert_eq!(make_batches(&lens, 4, 9, 1).unwrap(), make_batches(&lens, 4, 9, 1).unwrap());
        assert_ne!(make_batches(&lens, 4, 9, 1).unwrap(), make_batches(&lens, 4, 9, 2).unwrap());
        let mut all: Vec<usize> = make_batches(&lens, 3, 9, 1).unwrap().into_iter().flat_map(|b| b.indices).collect();
        all.sort();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn masks_mark_real_tokens() {
        let b = make_batches(&[2, 4], 2, 0, 1).unwrap();
        let b = &b[0];
        assert_eq!(b.max_len, 4);
        for (row, &i) in b.mask.iter().zip(&b.indices) {
            assert_eq!(row.iter().filter(|m| **m).count(), [2, 4][i]);
        }
        assert!(make_batches(&[1], 0, 0, 1).is_err());
    }

    #[test]
    fn batch_loss_is_sum_of_sentence_losses() {
        let words: Vec<Vec<String>> = vec![
            vec!["a".into(), "b".into()],
            vec!["c".into(), "a".into(), "b".into(), "d".into()],
        ];
        let tags: Vec<Vec<String>> = vec![
            vec!["B-x".into(), "I-x".into()],
            vec!["O".into(), "B-x".into(), "I-x".into(), "O".into()],
        ];
        let cfg = ModelConfig {
            embedding: EmbeddingConfig { word_dim: 3, char_dim: 2, char_inner_dim: 2 },
            bilstm: BiLstmConfig { num_layers: 1, hidden_total: 4 },
            ..Default::default()
        };
        let t = Tagger::build(&cfg, &tag_set(tags.iter().flatten()), &words, &Resources::default(), 2).unwrap();
        let batch = &make_batches(&[2, 4], 2, 0, 1).unwrap()[0];
        let mut tape = Tape::eval();
        let mut sum = 0.0;
        for &i in &batch.indices {
            let l = t.loss(&mut tape, &words[i], &tags[i]).unwrap();
            sum += tape.value(l).item().unwrap();
        }
        let single: f64 = (0..2)
            .map(|i| {
                let mut tp = Tape::eval();
                let l = t.loss(&mut tp, &words[i], &tags[i]).unwrap();
                tp.value(l).item().unwrap()
            })
            .sum();
        assert!((sum - single).abs() < 1e-6);
    }
}
