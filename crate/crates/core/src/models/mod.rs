//! Tagger architectures.

pub mod crf;
pub mod dual;
pub mod embedding;
pub mod heads;
pub mod linear;
pub mod lstm;
pub mod tagger;
pub mod transformer;

pub use crf::{crf_nll, log_partition, nll_and_grads, path_score, viterbi};
pub use dual::{concat_word_states, dual_encoder_forward, DualInput};
pub use embedding::{assemble_word_repr, load_pretrained_embeddings, EmbeddingConfig, PretrainedEmbeddings, Vocab, WordEmbedder};
pub use heads::{classify_tokens, Head, HeadKind};
pub use linear::{LayerNorm, Linear};
pub use lstm::{BiLstm, BiLstmConfig, BiLstmLayer, Lstm};
pub use tagger::{tag_set, ModelConfig, ModelFamily, Resources, Tagger};
pub use transformer::{Encoder, EncoderConfig, EncoderOutput};
