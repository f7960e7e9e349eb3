//! Sequence taggers: bi-LSTM+CRF, single encoder with a head, and the
//! two-encoder concatenation model.

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::crf::{crf_nll, viterbi};
use super::dual::concat_word_states;
use super::embedding::{EmbeddingConfig, PretrainedEmbeddings, Vocab, WordEmbedder};
use super::heads::{Head, HeadKind};
use super::linear::Linear;
use super::lstm::{BiLstm, BiLstmConfig};
use super::transformer::{Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::numerics::checkpoint::Checkpoint;
use crate::numerics::rng::stream;
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::tokenize::{chunk_words, normalize_numbers, wordpiece_tokenize, SubwordVocab, PAD_LABEL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    BilstmCrf,
    EncoderLinear,
    EncoderBilstm,
    DualEncoderLinear,
    DualEncoderBilstm,
}

impl ModelFamily {
    pub fn head_kind(self) -> Option<HeadKind> {
        match self {
            Self::BilstmCrf => None,
            Self::EncoderLinear | Self::DualEncoderLinear => Some(HeadKind::LinearSoftmax),
            Self::EncoderBilstm | Self::DualEncoderBilstm => Some(HeadKind::BilstmOverLast4),
        }
    }

    pub fn is_dual(self) -> bool {
        matches!(self, Self::DualEncoderLinear | Self::DualEncoderBilstm)
    }

    /// Recurrent families get gradient clipping.
    pub fn is_recurrent(self) -> bool {
        matches!(self, Self::BilstmCrf)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub family: ModelFamily,
    pub embedding: EmbeddingConfig,
    pub bilstm: BiLstmConfig,
    pub encoder: EncoderConfig,
    /// Second encoder of the dual families; the first encoder's sizes when absent.
    pub second_encoder: Option<EncoderConfig>,
    /// Casing of the first encoder's subword vocabulary.
    pub lowercase: bool,
    pub second_lowercase: bool,
    /// Whole-word pieces kept when a subword vocabulary is derived from the corpus.
    pub min_piece_count: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            family: ModelFamily::BilstmCrf,
            embedding: EmbeddingConfig::default(),
            bilstm: BiLstmConfig::default(),
            encoder: EncoderConfig::default(),
            second_encoder: None,
            lowercase: false,
            second_lowercase: true,
            min_piece_count: 2,
        }
    }
}

impl ModelConfig {
    pub fn second_encoder(&self) -> &EncoderConfig {
        self.second_encoder.as_ref().unwrap_or(&self.encoder)
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            ModelFamily::BilstmCrf => {
                self.embedding.validate()?;
                self.bilstm.validate()
            }
            f => {
                self.encoder.validate()?;
                if f.is_dual() {
                    self.second_encoder().validate()?;
                }
                if f.head_kind() == Some(HeadKind::BilstmOverLast4) && !f.is_dual() && self.encoder.num_layers < 4 {
                    return Err(Error::InvalidArgument(format!(
                        "encoder_bilstm reads the last four layers but the encoder has {}",
                        self.encoder.num_layers
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Optional inputs that are not learned from the training sentences.
#[derive(Clone, Debug, Default)]
pub struct Resources {
    pub pretrained: Option<PretrainedEmbeddings>,
    pub vocab_a: Option<SubwordVocab>,
    pub vocab_b: Option<SubwordVocab>,
}

#[derive(Clone, Debug)]
struct SubwordEncoder {
    vocab: SubwordVocab,
    encoder: Encoder,
}

impl SubwordEncoder {
    fn split(&self, words: &[String]) -> Vec<Vec<usize>> {
        words
            .iter()
            .map(|w| wordpiece_tokenize(w, &self.vocab).iter().map(|p| self.vocab.id(p)).collect())
            .collect()
    }

    fn limit(&self) -> usize {
        self.encoder.config.max_positions.saturating_sub(2).max(1)
    }

    /// `[CLS] pieces [SEP]` for the words in `range`, each word cut to
    /// `limit` pieces, with every word's first-piece position.
    fn chunk_ids(&self, split: &[Vec<usize>], range: Range<usize>, limit: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut ids = vec![self.vocab.cls_id()?];
        let mut first = Vec::with_capacity(range.len());
        for w in &split[range] {
            first.push(ids.len());
            ids.extend(w.iter().take(limit));
        }
        ids.push(self.vocab.sep_id()?);
        Ok((ids, first))
    }
}

#[derive(Clone, Debug)]
enum Net {
    Crf {
        embedder: WordEmbedder,
        lstm: BiLstm,
        proj: Linear,
        transitions: ParamId,
    },
    Encoder {
        enc: SubwordEncoder,
        head: Head,
    },
    Dual {
        a: SubwordEncoder,
        b: SubwordEncoder,
        head: Head,
    },
}

/// A model family with its vocabularies, tag set, and parameters.
#[derive(Clone, Debug)]
pub struct Tagger {
    pub config: ModelConfig,
    /// Output labels. Encoder families end with the padding label.
    pub tags: Vec<String>,
    pub store: ParamStore,
    pub dropout: f64,
    tag_index: HashMap<String, usize>,
    net: Net,
}

/// `O` first, then `B-`/`I-` pairs in type order, for every type present in `tags`.
pub fn tag_set<S: AsRef<str>>(tags: impl IntoIterator<Item = S>) -> Vec<String> {
    let mut types = std::collections::BTreeSet::new();
    for t in tags {
        let t = t.as_ref();
        if let Some(ty) = t.strip_prefix("B-").or_else(|| t.strip_prefix("I-")) {
            types.insert(ty.to_string());
        }
    }
    let mut out = vec!["O".to_string()];
    for ty in types {
        out.push(format!("B-{ty}"));
        out.push(format!("I-{ty}"));
    }
    out
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

impl Tagger {
    /// Builds a freshly initialized tagger. Word and character vocabularies
    /// (and subword vocabularies not supplied in `resources`) come from
    /// `sentences`; `tags` is the label inventory without the padding label.
    pub fn build(config: &ModelConfig, tags: &[String], sentences: &[Vec<String>], resources: &Resources, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(seed, "init");
        let mut store = ParamStore::new();
        let mut tags = tags.to_vec();
        if tags.is_empty() {
            return Err(Error::InvalidArgument("empty tag set".into()));
        }
        let all_words: Vec<&String> = sentences.iter().flatten().collect();
        let net = match config.family {
            ModelFamily::BilstmCrf => {
                let normalized = normalize_numbers(&all_words);
                let words = Vocab::new(normalized.iter().cloned());
                let chars = Vocab::new(normalized.iter().flat_map(|w| w.chars()).map(String::from).collect::<std::collections::BTreeSet<_>>());
                Self::crf_net(&mut store, config, tags.len(), words, chars, resources.pretrained.as_ref(), &mut rng)?
            }
            family => {
                tags.push(PAD_LABEL.to_string());
                let derive = |lowercase| SubwordVocab::derive(&all_words, config.min_piece_count, lowercase);
                let va = resources.vocab_a.clone().unwrap_or_else(|| derive(config.lowercase));
                if family.is_dual() {
                    let vb = resources.vocab_b.clone().unwrap_or_else(|| derive(config.second_lowercase));
                    Self::dual_net(&mut store, config, tags.len(), va, vb, &mut rng)?
                } else {
                    Self::encoder_net(&mut store, config, tags.len(), va, &mut rng)?
                }
            }
        };
        Ok(Self::assemble(config.clone(), tags, store, net))
    }

    fn assemble(config: ModelConfig, tags: Vec<String>, store: ParamStore, net: Net) -> Self {
        let tag_index = tags.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            config,
            tags,
            store,
            dropout: 0.0,
            tag_index,
            net,
        }
    }

    fn crf_net(
        store: &mut ParamStore,
        config: &ModelConfig,
        k: usize,
        words: Vocab,
        chars: Vocab,
        pretrained: Option<&PretrainedEmbeddings>,
        rng: &mut crate::numerics::rng::StreamRng,
    ) -> Result<Net> {
        let embedder = WordEmbedder::new(store, "embed", &config.embedding, words, chars, pretrained, rng)?;
        let lstm = BiLstm::new(store, "bilstm", config.embedding.output_dim(), &config.bilstm, rng)?;
        let proj = Linear::xavier(store, "emissions", config.bilstm.hidden_total, k, rng)?;
        let transitions = store.add("crf.transitions", Tensor::zeros(k + 2, k + 2))?;
        Ok(Net::Crf { embedder, lstm, proj, transitions })
    }

    fn encoder_net(store: &mut ParamStore, config: &ModelConfig, t: usize, vocab: SubwordVocab, rng: &mut crate::numerics::rng::StreamRng) -> Result<Net> {
        let kind = config.family.head_kind().expect("encoder family");
        let encoder = Encoder::new(store, "encoder", &config.encoder, vocab.len(), rng)?;
        let head = Head::new(store, "head", kind, Head::input_dim_for(kind, config.encoder.hidden_size), t, rng)?;
        Ok(Net::Encoder {
            enc: SubwordEncoder { vocab: vocab.with_lowercase(config.lowercase), encoder },
            head,
        })
    }

    fn dual_net(store: &mut ParamStore, config: &ModelConfig, t: usize, va: SubwordVocab, vb: SubwordVocab, rng: &mut crate::numerics::rng::StreamRng) -> Result<Net> {
        let kind = config.family.head_kind().expect("encoder family");
        let ea = Encoder::new(store, "encoder_a", &config.encoder, va.len(), rng)?;
        let eb = Encoder::new(store, "encoder_b", config.second_encoder(), vb.len(), rng)?;
        let width = config.encoder.hidden_size + config.second_encoder().hidden_size;
        let head = Head::new(store, "head", kind, width, t, rng)?;
        Ok(Net::Dual {
            a: SubwordEncoder { vocab: va.with_lowercase(config.lowercase), encoder: ea },
            b: SubwordEncoder { vocab: vb.with_lowercase(config.second_lowercase), encoder: eb },
            head,
        })
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout = p;
        self
    }

    pub fn tag_id(&self, tag: &str) -> Result<usize> {
        self.tag_index
            .get(tag)
            .copied()
            .ok_or_else(|| Error::InvalidTag(format!("{tag:?} is not in the model's tag set")))
    }

    /// Word-level scores: one `(word range, scores)` per chunk. For the CRF
    /// family the scores are emissions and there is a single chunk.
    fn word_scores(&self, tape: &mut Tape, store: &ParamStore, words: &[String]) -> Result<Vec<(Range<usize>, Var)>> {
        if words.is_empty() {
            return Ok(Vec::new());
        }
        let p = self.dropout;
        match &self.net {
            Net::Crf { embedder, lstm, proj, .. } => {
                let normalized = normalize_numbers(words);
                let x = embedder.assemble(tape, store, &normalized)?;
                let x = tape.dropout(x, p)?;
                let h = lstm.forward(tape, store, x, p)?;
                let h = tape.dropout(h, p)?;
                Ok(vec![(0..words.len(), proj.forward(tape, store, h)?)])
            }
            Net::Encoder { enc, head } => {
                let split = enc.split(words);
                let limit = enc.limit();
                let counts: Vec<usize> = split.iter().map(|s| s.len().min(limit)).collect();
                let mut out = Vec::new();
                for range in chunk_words(&counts, limit) {
                    let (ids, first) = enc.chunk_ids(&split, range.clone(), limit)?;
                    let o = enc.encoder.forward(tape, store, &ids, &vec![true; ids.len()], p)?;
                    let input = Head::select_input(head.kind, tape, &o.layers)?;
                    let logits = head.logits(tape, store, input, p)?;
                    out.push((range, tape.gather_rows(logits, &first)?));
                }
                Ok(out)
            }
            Net::Dual { a, b, head } => {
                let (sa, sb) = (a.split(words), b.split(words));
                let limit = a.limit().min(b.limit());
                let counts: Vec<usize> = sa.iter().zip(&sb).map(|(x, y)| x.len().max(y.len()).min(limit)).collect();
                let mut out = Vec::new();
                for range in chunk_words(&counts, limit) {
                    let (ids_a, first_a) = a.chunk_ids(&sa, range.clone(), limit)?;
                    let (ids_b, first_b) = b.chunk_ids(&sb, range.clone(), limit)?;
                    let oa = a.encoder.forward(tape, store, &ids_a, &vec![true; ids_a.len()], p)?;
                    let ob = b.encoder.forward(tape, store, &ids_b, &vec![true; ids_b.len()], p)?;
                    let joint = concat_word_states(tape, oa.last(), &first_a, ob.last(), &first_b)?;
                    let joint = tape.dropout(joint, p)?;
                    out.push((range, head.logits(tape, store, joint, p)?));
                }
                Ok(out)
            }
        }
    }

    /// Negative log-likelihood of the gold tags for one sentence, evaluated
    /// against `store` (normally `self.store`).
    pub fn loss_with(&self, tape: &mut Tape, store: &ParamStore, words: &[String], tags: &[String]) -> Result<Var> {
        if words.len() != tags.len() {
            return Err(Error::LengthMismatch(format!("{} words, {} tags", words.len(), tags.len())));
        }
        if words.is_empty() {
            return Ok(tape.constant(Tensor::scalar(0.0)));
        }
        let gold = tags.iter().map(|t| self.tag_id(t)).collect::<Result<Vec<usize>>>()?;
        let chunks = self.word_scores(tape, store, words)?;
        if let Net::Crf { transitions, .. } = &self.net {
            let trans = tape.param(store, *transitions);
            return crf_nll(tape, chunks[0].1, trans, &gold);
        }
        let mut parts = Vec::with_capacity(chunks.len());
        for (range, logits) in chunks {
            let lp = tape.log_softmax_rows(logits)?;
            let picks: Vec<(usize, usize)> = range.clone().enumerate().map(|(i, w)| (i, gold[w])).collect();
            let ll = tape.pick_sum(lp, &picks)?;
            parts.push(tape.scale(ll, -1.0));
        }
        let mut total = parts[0];
        for p in &parts[1..] {
            total = tape.add(total, *p)?;
        }
        Ok(total)
    }

    pub fn loss(&self, tape: &mut Tape, words: &[String], tags: &[String]) -> Result<Var> {
        self.loss_with(tape, &self.store, words, tags)
    }

    /// Word-level tags. A padding label predicted on a word becomes `O`.
    pub fn predict(&self, words: &[String]) -> Result<Vec<String>> {
        let mut tape = Tape::eval();
        let chunks = self.word_scores(&mut tape, &self.store, words)?;
        let mut out = Vec::with_capacity(words.len());
        if let Net::Crf { transitions, .. } = &self.net {
            for (_, e) in chunks {
                let path = viterbi(tape.value(e), self.store.get(*transitions))?;
                out.extend(path.into_iter().map(|i| self.tags[i].clone()));
            }
            return Ok(out);
        }
        for (_, logits) in chunks {
            for row in tape.value(logits).to_rows() {
                let tag = &self.tags[argmax(&row)];
                out.push(if tag == PAD_LABEL { "O".to_string() } else { tag.clone() });
            }
        }
        Ok(out)
    }

    /// Tags without the padding label.
    pub fn entity_tags(&self) -> &[String] {
        match self.tags.last() {
            Some(t) if t == PAD_LABEL => &self.tags[..self.tags.len() - 1],
            _ => &self.tags,
        }
    }

    pub fn to_checkpoint(&self, seed: u64, run_config: &str) -> Result<Checkpoint> {
        let mut tables = BTreeMap::new();
        tables.insert("model_config".to_string(), vec![serde_json::to_string(&self.config)?]);
        tables.insert("tags".to_string(), self.entity_tags().to_vec());
        match &self.net {
            Net::Crf { embedder, .. } => {
                tables.insert("words".to_string(), embedder.words.items().to_vec());
                tables.insert("chars".to_string(), embedder.chars.items().to_vec());
            }
            Net::Encoder { enc, .. } => {
                tables.insert("pieces_a".to_string(), enc.vocab.pieces().to_vec());
            }
            Net::Dual { a, b, .. } => {
                tables.insert("pieces_a".to_string(), a.vocab.pieces().to_vec());
                tables.insert("pieces_b".to_string(), b.vocab.pieces().to_vec());
            }
        }
        Ok(Checkpoint {
            seed,
            config: run_config.to_string(),
            tables,
            params: self.store.clone(),
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let cfg_json = ckpt
            .table("model_config")?
            .first()
            .ok_or_else(|| Error::Checkpoint("empty model_config table".into()))?;
        let config: ModelConfig = serde_json::from_str(cfg_json)?;
        config.validate()?;
        let mut tags = ckpt.table("tags")?.to_vec();
        let mut store = ParamStore::new();
        let mut rng = stream(ckpt.seed, "init");
        let pieces = |name: &str, lowercase: bool| -> Result<SubwordVocab> {
            Ok(SubwordVocab::from_pieces(ckpt.table(name)?.iter().cloned()).with_lowercase(lowercase))
        };
        let net = match config.family {
            ModelFamily::BilstmCrf => {
                let words = Vocab::from_items(ckpt.table("words")?)?;
                let chars = Vocab::from_items(ckpt.table("chars")?)?;
                Self::crf_net(&mut store, &config, tags.len(), words, chars, None, &mut rng)?
            }
            family => {
                tags.push(PAD_LABEL.to_string());
                let va = pieces("pieces_a", config.lowercase)?;
                if family.is_dual() {
                    let vb = pieces("pieces_b", config.second_lowercase)?;
                    Self::dual_net(&mut store, &config, tags.len(), va, vb, &mut rng)?
                } else {
                    Self::encoder_net(&mut store, &config, tags.len(), va, &mut rng)?
                }
            }
        };
        store.load_from(&ckpt.params)?;
        Ok(Self::assemble(config, tags, store, net))
    }
}
