//! Word representations for the recurrent tagger: a word vector concatenated
//! with a character-level bi-LSTM encoding.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::lstm::BiLstmLayer;
use crate::error::{Error, Result};
use crate::numerics::rng::{uniform, StreamRng};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub word_dim: usize,
    /// Width of the character encoding (both directions).
    pub char_dim: usize,
    /// Width of each character embedding fed to the character bi-LSTM.
    pub char_inner_dim: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            word_dim: 300,
            char_dim: 100,
            char_inner_dim: 25,
        }
    }
}

impl EmbeddingConfig {
    pub fn output_dim(&self) -> usize {
        self.word_dim + self.char_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.word_dim == 0 || self.char_inner_dim == 0 || self.char_dim == 0 || !self.char_dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "embedding widths must be positive and char_dim even, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// String-to-index map with the unknown entry at index 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub const UNK: &'static str = "<unk>";

    pub fn new<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Self::default();
        v.insert(Self::UNK.to_string());
        for s in items {
            v.insert(s.into());
        }
        v
    }

    /// Rebuilds a vocabulary from its serialized item list (UNK first).
    pub fn from_items(items: &[String]) -> Result<Self> {
        if items.first().map(String::as_str) != Some(Self::UNK) {
            return Err(Error::Checkpoint("vocabulary table must start with <unk>".into()));
        }
        Ok(Self::new(items[1..].iter().cloned()))
    }

    fn insert(&mut self, s: String) {
        if !self.index.contains_key(&s) {
            self.index.insert(s.clone(), self.items.len());
            self.items.push(s);
        }
    }

    pub fn get(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn id(&self, s: &str) -> usize {
        self.get(s).unwrap_or(0)
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Vectors read from a whitespace-separated text file.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainedEmbeddings {
    pub tokens: Vec<String>,
    pub vectors: Tensor,
    index: HashMap<String, usize>,
}

impl PretrainedEmbeddings {
    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.vectors.row_slice(i))
    }
}

/// Reads `token v1 ... vd` lines. Every line must have the same `d`; a
/// repeated token keeps its first vector.
pub fn load_pretrained_embeddings(reader: impl BufRead) -> Result<PretrainedEmbeddings> {
    let mut tokens = Vec::new();
    let mut data = Vec::new();
    let mut index = HashMap::new();
    let mut dim = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values = fields
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: format!("bad value {f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None if values.is_empty() => {
                return Err(Error::Parse { line: i + 1, msg: "token without a vector".into() })
            }
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("vector has {} values, expected {d}", values.len()),
                })
            }
            Some(_) => {}
        }
        if index.contains_key(token) {
            log::warn!("embedding file line {}: duplicate token {token:?} ignored", i + 1);
            continue;
        }
        index.insert(token.to_string(), tokens.len());
        tokens.push(token.to_string());
        data.extend(values);
    }
    let vectors = Tensor::new(vec![tokens.len(), dim.unwrap_or(0)], data)?;
    Ok(PretrainedEmbeddings { tokens, vectors, index })
}

/// Word table, character table, and the character bi-LSTM.
#[derive(Clone, Debug)]
pub struct WordEmbedder {
    pub config: EmbeddingConfig,
    pub words: Vocab,
    pub chars: Vocab,
    word_table: ParamId,
    char_table: ParamId,
    char_lstm: BiLstmLayer,
}

impl WordEmbedder {
    /// Rows for words found in `pretrained` (exact, then lowercased) start
    /// from those vectors; all others are uniform in `±sqrt(3 / dim)`.
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        config: &EmbeddingConfig,
        words: Vocab,
        chars: Vocab,
        pretrained: Option<&PretrainedEmbeddings>,
        rng: &mut StreamRng,
    ) -> Result<Self> {
        config.validate()?;
        let mut table = uniform(rng, words.len(), config.word_dim, (3.0 / config.word_dim as f64).sqrt());
        if let Some(p) = pretrained {
            if p.dim() != config.word_dim {
                return Err(Error::InvalidArgument(format!(
                    "pretrained vectors have {} dims, word_dim is {}",
                    p.dim(),
                    config.word_dim
                )));
            }
            let mut hits = 0;
            for (i, w) in words.items().iter().enumerate() {
                if let Some(v) = p.get(w).or_else(|| p.get(&w.to_lowercase())) {
                    for (c, x) in v.iter().enumerate() {
                        table.set(i, c, *x);
                    }
                    hits += 1;
                }
            }
            log::info!("pretrained vectors cover {hits} of {} words", words.len());
        }
        let char_table = uniform(rng, chars.len(), config.char_inner_dim, (3.0 / config.char_inner_dim as f64).sqrt());
        Ok(Self {
            word_table: store.add(format!("{prefix}.words"), table)?,
            char_table: store.add(format!("{prefix}.chars"), char_table)?,
            char_lstm: BiLstmLayer::new(store, &format!("{prefix}.char_lstm"), config.char_inner_dim, config.char_dim / 2, rng)?,
            config: config.clone(),
            words,
            chars,
        })
    }

    pub fn word_id(&self, word: &str) -> usize {
        self.words
            .get(word)
            .or_else(|| self.words.get(&word.to_lowercase()))
            .unwrap_or(0)
    }

    /// `1 × char_dim` encoding; zeros for the empty string.
    pub fn char_encoding(&self, tape: &mut Tape, store: &ParamStore, word: &str) -> Result<Var> {
        if word.is_empty() {
            return Ok(tape.constant(Tensor::zeros(1, self.config.char_dim)));
        }
        let ids: Vec<usize> = word.chars().map(|c| self.chars.id(&c.to_string())).collect();
        let table = tape.param(store, self.char_table);
        let x = tape.gather_rows(table, &ids)?;
        Ok(self.char_lstm.forward(tape, store, x)?.1)
    }

    /// `n × (word_dim + char_dim)` representations for a sentence.
    pub fn assemble(&self, tape: &mut Tape, store: &ParamStore, words: &[String]) -> Result<Var> {
        let ids: Vec<usize> = words.iter().map(|w| self.word_id(w)).collect();
        let table = tape.param(store, self.word_table);
        let wv = tape.gather_rows(table, &ids)?;
        let cv = words
            .iter()
            .map(|w| self.char_encoding(tape, store, w))
            .collect::<Result<Vec<Var>>>()?;
        let cv = tape.concat_rows(&cv)?;
        tape.concat_cols(&[wv, cv])
    }
}

/// Representation of a single word: its vector followed by its character encoding.
pub fn assemble_word_repr(tape: &mut Tape, store: &ParamStore, embedder: &WordEmbedder, word: &str) -> Result<Var> {
    embedder.assemble(tape, store, &[word.to_string()])
}
