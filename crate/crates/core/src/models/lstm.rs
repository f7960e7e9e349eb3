//! LSTM recurrences with gate order input, forget, cell, output.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numerics::rng::{xavier_uniform, StreamRng};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

/// Stack of bidirectional layers. `hidden_total` is the concatenated width
/// of both directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiLstmConfig {
    pub num_layers: usize,
    pub hidden_total: usize,
}

impl Default for BiLstmConfig {
    fn default() -> Self {
        Self {
            num_layers: 2,
            hidden_total: 1536,
        }
    }
}

impl BiLstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_total == 0 || !self.hidden_total.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "bi-LSTM needs at least one layer and an even positive width, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// One direction of an LSTM.
#[derive(Clone, Debug)]
pub struct Lstm {
    w_ih: ParamId,
    w_hh: ParamId,
    bias: ParamId,
    input: usize,
    hidden: usize,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut StreamRng) -> Result<Self> {
        Ok(Self {
            w_ih: store.add(format!("{prefix}.w_ih"), xavier_uniform(rng, input, 4 * hidden))?,
            w_hh: store.add(format!("{prefix}.w_hh"), xavier_uniform(rng, hidden, 4 * hidden))?,
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(1, 4 * hidden))?,
            input,
            hidden,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Runs over the rows of `x` (`n × input`), right to left when `reverse`.
    /// Returns the `n × hidden` states in input order and the final state.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, reverse: bool) -> Result<(Var, Var)> {
        let (n, d) = tape.value(x).dims2()?;
        if d != self.input {
            return Err(shape_err("lstm", format!("input width {d}, expected {}", self.input)));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("LSTM over an empty sequence".into()));
        }
        let h = self.hidden;
        let w_ih = tape.param(store, self.w_ih);
        let w_hh = tape.param(store, self.w_hh);
        let bias = tape.param(store, self.bias);
        let xw = tape.matmul(x, w_ih)?;
        let proj = tape.add_row(xw, bias)?;

        let mut states: Vec<Option<Var>> = vec![None; n];
        let mut prev: Option<(Var, Var)> = None;
        let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
        for &t in &order {
            let mut z = tape.slice_rows(proj, t, t + 1)?;
            if let Some((h_prev, _)) = prev {
                let rec = tape.matmul(h_prev, w_hh)?;
                z = tape.add(z, rec)?;
            }
            let zi = tape.slice_cols(z, 0, h)?;
            let zf = tape.slice_cols(z, h, 2 * h)?;
            let zg = tape.slice_cols(z, 2 * h, 3 * h)?;
            let zo = tape.slice_cols(z, 3 * h, 4 * h)?;
            let i = tape.sigmoid(zi);
            let g = tape.tanh(zg);
            let o = tape.sigmoid(zo);
            let mut c = tape.mul(i, g)?;
            if let Some((_, c_prev)) = prev {
                let f = tape.sigmoid(zf);
                let keep = tape.mul(f, c_prev)?;
                c = tape.add(c, keep)?;
            }
            let tc = tape.tanh(c);
            let h_t = tape.mul(o, tc)?;
            states[t] = Some(h_t);
            prev = Some((h_t, c));
        }
        let rows: Vec<Var> = states.into_iter().map(|s| s.expect("every step ran")).collect();
        let out = tape.concat_rows(&rows)?;
        Ok((out, prev.expect("non-empty").0))
    }
}

/// Forward and backward LSTMs whose outputs are concatenated per position.
#[derive(Clone, Debug)]
pub struct BiLstmLayer {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

impl BiLstmLayer {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, hidden_per_dir: usize, rng: &mut StreamRng) -> Result<Self> {
        Ok(Self {
            fwd: Lstm::new(store, &format!("{prefix}.fwd"), input, hidden_per_dir, rng)?,
            bwd: Lstm::new(store, &format!("{prefix}.bwd"), input, hidden_per_dir, rng)?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden() + self.bwd.hidden()
    }

    /// `n × 2h` states and the `1 × 2h` concatenation of both final states.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<(Var, Var)> {
        let (f, f_last) = self.fwd.forward(tape, store, x, false)?;
        let (b, b_last) = self.bwd.forward(tape, store, x, true)?;
        Ok((tape.concat_cols(&[f, b])?, tape.concat_cols(&[f_last, b_last])?))
    }
}

#[derive(Clone, Debug)]
pub struct BiLstm {
    pub layers: Vec<BiLstmLayer>,
}

impl BiLstm {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, config: &BiLstmConfig, rng: &mut StreamRng) -> Result<Self> {
        config.validate()?;
        let per_dir = config.hidden_total / 2;
        let mut layers = Vec::with_capacity(config.num_layers);
        let mut width = input;
        for l in 0..config.num_layers {
            layers.push(BiLstmLayer::new(store, &format!("{prefix}.l{l}"), width, per_dir, rng)?);
            width = config.hidden_total;
        }
        Ok(Self { layers })
    }

    /// Applies the layers in order with dropout between them.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, dropout: f64) -> Result<Var> {
        let mut h = x;
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                h = tape.dropout(h, dropout)?;
            }
            h = layer.forward(tape, store, h)?.0;
        }
        Ok(h)
    }
}
