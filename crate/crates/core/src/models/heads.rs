//! Token classification heads over encoder states.

use serde::{Deserialize, Serialize};

use super::linear::Linear;
use super::lstm::BiLstmLayer;
use crate::error::{shape_err, Error, Result};
use crate::numerics::rng::StreamRng;
use crate::numerics::{ParamStore, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Linear map of the last layer to tag logits.
    LinearSoftmax,
    /// Bidirectional LSTM over the last four layers concatenated, then linear.
    BilstmOverLast4,
}

#[derive(Clone, Debug)]
pub struct Head {
    pub kind: HeadKind,
    pub input_dim: usize,
    lstm: Option<BiLstmLayer>,
    out: Linear,
}

impl Head {
    /// `input_dim` is the width of what [`Head::logits`] receives. The
    /// recurrent variant keeps that width: each direction has `input_dim / 2`
    /// units.
    pub fn new(store: &mut ParamStore, prefix: &str, kind: HeadKind, input_dim: usize, num_tags: usize, rng: &mut StreamRng) -> Result<Self> {
        let lstm = match kind {
            HeadKind::LinearSoftmax => None,
            HeadKind::BilstmOverLast4 => {
                if !input_dim.is_multiple_of(2) {
                    return Err(Error::InvalidArgument(format!("recurrent head needs an even input width, got {input_dim}")));
                }
                Some(BiLstmLayer::new(store, &format!("{prefix}.lstm"), input_dim, input_dim / 2, rng)?)
            }
        };
        Ok(Self {
            kind,
            input_dim,
            lstm,
            out: Linear::xavier(store, &format!("{prefix}.out"), input_dim, num_tags, rng)?,
        })
    }

    /// Width the head expects on top of one encoder of the given hidden size.
    pub fn input_dim_for(kind: HeadKind, hidden_size: usize) -> usize {
        match kind {
            HeadKind::LinearSoftmax => hidden_size,
            HeadKind::BilstmOverLast4 => 4 * hidden_size,
        }
    }

    /// Selects the head input from one encoder's per-layer states.
    pub fn select_input(kind: HeadKind, tape: &mut Tape, layers: &[Var]) -> Result<Var> {
        match kind {
            HeadKind::LinearSoftmax => layers
                .last()
                .copied()
                .ok_or_else(|| Error::InvalidArgument("encoder produced no layers".into())),
            HeadKind::BilstmOverLast4 => {
                if layers.len() < 4 {
                    return Err(Error::InvalidArgument(format!(
                        "recurrent head needs four encoder layers, got {}",
                        layers.len()
                    )));
                }
                tape.concat_cols(&layers[layers.len() - 4..])
            }
        }
    }

    /// `n × num_tags` logits.
    pub fn logits(&self, tape: &mut Tape, store: &ParamStore, input: Var, dropout: f64) -> Result<Var> {
        let d = tape.value(input).dims2()?.1;
        if d != self.input_dim {
            return Err(shape_err("head", format!("input width {d}, expected {}", self.input_dim)));
        }
        let mut x = input;
        if let Some(lstm) = &self.lstm {
            x = lstm.forward(tape, store, x)?.0;
            x = tape.dropout(x, dropout)?;
        }
        self.out.forward(tape, store, x)
    }
}

/// Head logits on top of one encoder's per-layer states.
pub fn classify_tokens(tape: &mut Tape, store: &ParamStore, head: &Head, layers: &[Var], dropout: f64) -> Result<Var> {
    let input = Head::select_input(head.kind, tape, layers)?;
    head.logits(tape, store, input, dropout)
}
