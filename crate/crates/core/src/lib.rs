//! Entity recognition toolkit for clinical and biomedical text.
//!
//! The crate covers the whole experimental pipeline:
//!
//! - [`corpus`]: PubTator and i2b2 ingestion, multi-label resolution, IOB conversion, statistics
//! - [`tokenize`]: word tokenization, numeric normalization, WordPiece, first-piece label alignment
//! - [`numerics`]: dense tensors, a reverse-mode tape, Adam with decoupled weight decay, warmup/decay schedule
//! - [`models`]: bi-LSTM+CRF, transformer encoder, classification heads, dual-encoder concatenation
//! - [`training`]: batching, epochs, k-fold cross-validation, hyperparameter grids, checkpoints
//! - [`eval`]: strict entity-level scoring, partial-error taxonomy, model disagreement

pub mod corpus;
pub mod error;
pub mod eval;
pub mod models;
pub mod numerics;
pub mod tokenize;
pub mod training;

pub use error::{Error, Result};

pub use corpus::{CorpusStats, Document, LabelScheme, LabeledSequence, Mention, Partition};
pub use eval::{Entity, ErrorBreakdown, EvalReport, Prf};
pub use numerics::{ParamStore, Tape, Tensor, Var};
pub use training::{TrainConfig, TrainOutcome};
