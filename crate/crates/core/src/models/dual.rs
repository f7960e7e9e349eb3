//! Word-level concatenation of two encoders' final states.

use super::transformer::Encoder;
use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tape, Var};

/// Picks each word's first-piece row from both encoders and joins them:
/// `n_words × (H_a + H_b)`.
pub fn concat_word_states(tape: &mut Tape, a_last: Var, a_first: &[usize], b_last: Var, b_first: &[usize]) -> Result<Var> {
    if a_first.len() != b_first.len() {
        return Err(Error::LengthMismatch(format!(
            "first encoder sees {} words, second sees {}",
            a_first.len(),
            b_first.len()
        )));
    }
    let a = tape.gather_rows(a_last, a_first)?;
    let b = tape.gather_rows(b_last, b_first)?;
    tape.concat_cols(&[a, b])
}

/// One side of the pair: an encoder with its own piece ids and the position
/// of each word's first piece.
pub struct DualInput<'a> {
    pub encoder: &'a Encoder,
    pub ids: &'a [usize],
    pub first_positions: &'a [usize],
}

/// Runs both encoders and concatenates their final layers word by word.
pub fn dual_encoder_forward(tape: &mut Tape, store: &ParamStore, a: DualInput<'_>, b: DualInput<'_>, dropout: f64) -> Result<Var> {
    let oa = a.encoder.forward(tape, store, a.ids, &vec![true; a.ids.len()], dropout)?;
    let ob = b.encoder.forward(tape, store, b.ids, &vec![true; b.ids.len()], dropout)?;
    concat_word_states(tape, oa.last(), a.first_positions, ob.last(), b.first_positions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::heads::{Head, HeadKind};
    use crate::models::transformer::EncoderConfig;
    use crate::numerics::rng::stream;
    use crate::numerics::Tensor;

    #[test]
    fn concat_width_and_liveness() {
        let mut store = ParamStore::new();
        let cfg = EncoderConfig { num_layers: 1, hidden_size: 8, num_heads: 2, max_positions: 8, intermediate_size: 8 };
        let mut rng = stream(4, "i");
        let ea = Encoder::new(&mut store, "a", &cfg, 7, &mut rng).unwrap();
        let eb = Encoder::new(&mut store, "b", &cfg, 9, &mut rng).unwrap();
        let head = Head::new(&mut store, "head", HeadKind::LinearSoftmax, 16, 3, &mut rng).unwrap();

        let mut tape = Tape::eval();
        let (ids_a, first_a) = ([1, 2, 3, 4], [0, 1, 3]);
        let (ids_b, first_b) = ([5, 6, 7, 8, 1], [0, 2, 4]);
        let a = DualInput { encoder: &ea, ids: &ids_a, first_positions: &first_a };
        let b = DualInput { encoder: &eb, ids: &ids_b, first_positions: &first_b };
        let joint = dual_encoder_forward(&mut tape, &store, a, b, 0.0).unwrap();
        assert_eq!(tape.value(joint).shape(), &[3, 16]);
        let logits = head.logits(&mut tape, &store, joint, 0.0).unwrap();

        let oa = ea.forward(&mut tape, &store, &ids_a, &[true; 4], 0.0).unwrap();
        let zero_b = tape.constant(Tensor::zeros(5, 8));
        let ablated = concat_word_states(&mut tape, oa.last(), &first_a, zero_b, &first_b).unwrap();
        let ablated_logits = head.logits(&mut tape, &store, ablated, 0.0).unwrap();
        assert_ne!(tape.value(logits), tape.value(ablated_logits));
    }

    #[test]
    fn word_count_mismatch() {
        let mut tape = Tape::eval();
        let a = tape.constant(Tensor::zeros(3, 2));
        let b = tape.constant(Tensor::zeros(3, 2));
        assert!(concat_word_states(&mut tape, a, &[0, 1], b, &[0]).is_err());
    }
}
