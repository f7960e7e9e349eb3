//! Post-norm transformer encoder with learned position embeddings.

use serde::{Deserialize, Serialize};

use super::linear::{LayerNorm, Linear};
use crate::error::{Error, Result};
use crate::numerics::rng::{normal, StreamRng};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

const INIT_STD: f64 = 0.02;
const LN_EPS: f64 = 1e-12;
const MASKED: f64 = -1e9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub num_heads: usize,
    pub max_positions: usize,
    pub intermediate_size: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            num_layers: 4,
            hidden_size: 64,
            num_heads: 4,
            max_positions: 128,
            intermediate_size: 256,
        }
    }
}

impl EncoderConfig {
    /// Dimensions of the 12-layer base model.
    pub fn bert_base() -> Self {
        Self {
            num_layers: 12,
            hidden_size: 768,
            num_heads: 12,
            max_positions: 512,
            intermediate_size: 3072,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0
            || self.num_heads == 0
            || self.hidden_size == 0
            || self.intermediate_size == 0
            || self.max_positions == 0
            || !self.hidden_size.is_multiple_of(self.num_heads)
        {
            return Err(Error::InvalidArgument(format!(
                "encoder sizes must be positive with hidden_size divisible by num_heads, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Block {
    query: Linear,
    key: Linear,
    value: Linear,
    attn_out: Linear,
    attn_norm: LayerNorm,
    ff_in: Linear,
    ff_out: Linear,
    ff_norm: LayerNorm,
}

#[derive(Clone, Debug)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub vocab_size: usize,
    tokens: ParamId,
    positions: ParamId,
    embed_norm: LayerNorm,
    blocks: Vec<Block>,
}

/// Hidden states after each layer, plus attention probabilities
/// (`layer → head → n × n`).
#[derive(Clone, Debug)]
pub struct EncoderOutput {
    pub embeddings: Var,
    pub layers: Vec<Var>,
    pub attention: Vec<Vec<Var>>,
}

impl EncoderOutput {
    pub fn last(&self) -> Var {
        *self.layers.last().expect("at least one layer")
    }
}

impl Encoder {
    pub fn new(store: &mut ParamStore, prefix: &str, config: &EncoderConfig, vocab_size: usize, rng: &mut StreamRng) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_size;
        let tokens = store.add(format!("{prefix}.tokens"), normal(rng, vocab_size, h, INIT_STD))?;
        let positions = store.add(format!("{prefix}.positions"), normal(rng, config.max_positions, h, INIT_STD))?;
        let embed_norm = LayerNorm::new(store, &format!("{prefix}.embed_norm"), h, LN_EPS)?;
        let mut blocks = Vec::with_capacity(config.num_layers);
        for l in 0..config.num_layers {
            let p = format!("{prefix}.layer{l}");
            blocks.push(Block {
                query: Linear::normal(store, &format!("{p}.query"), h, h, INIT_STD, rng)?,
                key: Linear::normal(store, &format!("{p}.key"), h, h, INIT_STD, rng)?,
                value: Linear::normal(store, &format!("{p}.value"), h, h, INIT_STD, rng)?,
                attn_out: Linear::normal(store, &format!("{p}.attn_out"), h, h, INIT_STD, rng)?,
                attn_norm: LayerNorm::new(store, &format!("{p}.attn_norm"), h, LN_EPS)?,
                ff_in: Linear::normal(store, &format!("{p}.ff_in"), h, config.intermediate_size, INIT_STD, rng)?,
                ff_out: Linear::normal(store, &format!("{p}.ff_out"), config.intermediate_size, h, INIT_STD, rng)?,
                ff_norm: LayerNorm::new(store, &format!("{p}.ff_norm"), h, LN_EPS)?,
            });
        }
        Ok(Self {
            config: config.clone(),
            vocab_size,
            tokens,
            positions,
            embed_norm,
            blocks,
        })
    }

    /// Encodes one piece sequence. `mask[j] == false` marks padding, which
    /// no position may attend to.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, ids: &[usize], mask: &[bool], dropout: f64) -> Result<EncoderOutput> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::InvalidArgument("encoder input is empty".into()));
        }
        if n > self.config.max_positions {
            return Err(Error::InvalidArgument(format!(
                "{n} pieces exceed max_positions {}",
                self.config.max_positions
            )));
        }
        if mask.len() != n {
            return Err(Error::LengthMismatch(format!("{} mask entries for {n} pieces", mask.len())));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.vocab_size) {
            return Err(Error::InvalidArgument(format!("piece id {bad} outside vocabulary of {}", self.vocab_size)));
        }
        let tok_table = tape.param(store, self.tokens);
        let pos_table = tape.param(store, self.positions);
        let tok = tape.gather_rows(tok_table, ids)?;
        let pos_ids: Vec<usize> = (0..n).collect();
        let pos = tape.gather_rows(pos_table, &pos_ids)?;
        let sum = tape.add(tok, pos)?;
        let normed = self.embed_norm.forward(tape, store, sum)?;
        let embeddings = tape.dropout(normed, dropout)?;

        let mut key_mask = Tensor::zeros(n, n);
        for (j, _) in mask.iter().enumerate().filter(|(_, m)| !**m) {
            for i in 0..n {
                key_mask.set(i, j, MASKED);
            }
        }

        let mut x = embeddings;
        let mut layers = Vec::with_capacity(self.blocks.len());
        let mut attention = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (ctx, probs) = self.attend(tape, store, block, x, &key_mask, dropout)?;
            let proj = block.attn_out.forward(tape, store, ctx)?;
            let proj = tape.dropout(proj, dropout)?;
            let res = tape.add(x, proj)?;
            let a = block.attn_norm.forward(tape, store, res)?;

            let inner = block.ff_in.forward(tape, store, a)?;
            let inner = tape.gelu(inner);
            let ff = block.ff_out.forward(tape, store, inner)?;
            let ff = tape.dropout(ff, dropout)?;
            let res = tape.add(a, ff)?;
            x = block.ff_norm.forward(tape, store, res)?;
            layers.push(x);
            attention.push(probs);
        }
        Ok(EncoderOutput {
            embeddings,
            layers,
            attention,
        })
    }

    fn attend(&self, tape: &mut Tape, store: &ParamStore, block: &Block, x: Var, key_mask: &Tensor, dropout: f64) -> Result<(Var, Vec<Var>)> {
        let d = self.config.head_dim();
        let scale = 1.0 / (d as f64).sqrt();
        let q = block.query.forward(tape, store, x)?;
        let k = block.key.forward(tape, store, x)?;
        let v = block.value.forward(tape, store, x)?;
        let mut heads = Vec::with_capacity(self.config.num_heads);
        let mut probs = Vec::with_capacity(self.config.num_heads);
        for h in 0..self.config.num_heads {
            let qh = tape.slice_cols(q, h * d, (h + 1) * d)?;
            let kh = tape.slice_cols(k, h * d, (h + 1) * d)?;
            let vh = tape.slice_cols(v, h * d, (h + 1) * d)?;
            let kt = tape.transpose(kh)?;
            let raw = tape.matmul(qh, kt)?;
            let scaled = tape.scale(raw, scale);
            let masked = tape.add_const(scaled, key_mask)?;
            let p = tape.softmax_rows(masked)?;
            probs.push(p);
            let p = tape.dropout(p, dropout)?;
            heads.push(tape.matmul(p, vh)?);
        }
        Ok((tape.concat_cols(&heads)?, probs))
    }
}
