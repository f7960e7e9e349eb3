use crate::error::Result;
use crate::numerics::rng::{normal, xavier_uniform, StreamRng};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

/// Affine map `x W + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    /// Xavier-uniform weights, zero bias.
    pub fn xavier(store: &mut ParamStore, prefix: &str, input: usize, output: usize, rng: &mut StreamRng) -> Result<Self> {
        Ok(Self {
            w: store.add(format!("{prefix}.w"), xavier_uniform(rng, input, output))?,
            b: store.add(format!("{prefix}.b"), Tensor::zeros(1, output))?,
        })
    }

    /// Normal(0, std) weights, zero bias.
    pub fn normal(store: &mut ParamStore, prefix: &str, input: usize, output: usize, std: f64, rng: &mut StreamRng) -> Result<Self> {
        Ok(Self {
            w: store.add(format!("{prefix}.w"), normal(rng, input, output, std))?,
            b: store.add(format!("{prefix}.b"), Tensor::zeros(1, output))?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let xw = tape.matmul(x, w)?;
        tape.add_row(xw, b)
    }
}

/// Row layer normalization with learned gain and shift.
#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub shift: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, prefix: &str, dim: usize, eps: f64) -> Result<Self> {
        Ok(Self {
            gain: store.add(format!("{prefix}.gain"), Tensor::filled(1, dim, 1.0))?,
            shift: store.add(format!("{prefix}.shift"), Tensor::zeros(1, dim))?,
            eps,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let n = tape.layer_norm_rows(x, self.eps)?;
        let g = tape.param(store, self.gain);
        let s = tape.param(store, self.shift);
        let y = tape.mul_row(n, g)?;
        tape.add_row(y, s)
    }
}
