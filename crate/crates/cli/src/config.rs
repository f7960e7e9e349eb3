//! Run configuration files.
//!
//! TOML with one optional top-level key block and five sections. Relative
//! paths are resolved against the directory holding the file.
//!
//! ```toml
//! seed = 13                    # every random stream derives from this
//! output_dir = "runs"          # run directories are created below it
//!
//! [data]
//! train = "train.conll"        # required
//! dev = "dev.conll"            # model selection; the training set when absent
//! test = "test.conll"          # predictions and a report are written for it
//! embeddings = "vectors.txt"   # word vectors, `token v1 v2 ...` per line
//! vocab = "vocab.txt"          # WordPiece inventory of the (first) encoder
//! second_vocab = "vocab2.txt"  # WordPiece inventory of the second encoder
//!
//! [model]
//! family = "bilstm_crf"        # encoder_linear | encoder_bilstm | dual_encoder_linear | dual_encoder_bilstm
//! lowercase = false
//! second_lowercase = true
//! min_piece_count = 2
//! [model.embedding]            # word_dim, char_dim, char_inner_dim
//! [model.bilstm]               # num_layers, hidden_total
//! [model.encoder]              # num_layers, hidden_size, num_heads, max_positions, intermediate_size
//! [model.second_encoder]       # same keys; defaults to [model.encoder]
//!
//! [optimizer]
//! peak_lr = 0.001
//! batch_size = 32
//! epochs = 10
//! schedule = "constant"        # or "warmup_linear"
//! warmup_fraction = 0.1
//! weight_decay = 0.0
//! dropout = 0.1
//! beta1 = 0.9
//! beta2 = 0.999
//! epsilon = 1e-8
//! clip_norm = 5.0
//!
//! [cv]
//! folds = 10
//! batch_sizes = [16, 32]
//! learning_rates = [2e-5, 3e-5, 5e-5, 1e-4]
//! epochs = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
//! ```
//!
//! Keys left out of `[model]` and `[optimizer]` take the defaults of the
//! chosen family. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nerkit::models::ModelFamily;
use nerkit::training::GridPoint;
use nerkit::TrainConfig;

/// A problem with the command line or a configuration file (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: PathBuf,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub second_vocab: Option<PathBuf>,
}

impl DataPaths {
    fn entries(&self) -> Vec<(&'static str, &PathBuf)> {
        let mut out = vec![("train", &self.train)];
        for (k, v) in [
            ("dev", &self.dev),
            ("test", &self.test),
            ("embeddings", &self.embeddings),
            ("vocab", &self.vocab),
            ("second_vocab", &self.second_vocab),
        ] {
            if let Some(p) = v {
                out.push((k, p));
            }
        }
        out
    }

    fn resolved(&self, base: &Path) -> Self {
        let r = |p: &PathBuf| base.join(p);
        Self {
            train: r(&self.train),
            dev: self.dev.as_ref().map(r),
            test: self.test.as_ref().map(r),
            embeddings: self.embeddings.as_ref().map(r),
            vocab: self.vocab.as_ref().map(r),
            second_vocab: self.second_vocab.as_ref().map(r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSection {
    pub folds: usize,
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub epochs: Vec<usize>,
}

impl Default for CvSection {
    fn default() -> Self {
        Self {
            folds: 10,
            batch_sizes: vec![16, 32],
            learning_rates: vec![2e-5, 3e-5, 5e-5, 1e-4],
            epochs: (1..=10).collect(),
        }
    }
}

impl CvSection {
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &batch_size in &self.batch_sizes {
            for &peak_lr in &self.learning_rates {
                for &epochs in &self.epochs {
                    out.push(GridPoint { batch_size, peak_lr, epochs });
                }
            }
        }
        out
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    seed: u64,
    output_dir: Option<PathBuf>,
    data: DataPaths,
    #[serde(default)]
    model: toml::Table,
    #[serde(default)]
    optimizer: toml::Table,
    #[serde(default)]
    cv: CvSection,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// Paths as written in the file.
    pub data: DataPaths,
    /// Paths resolved against the file's directory.
    pub paths: DataPaths,
    pub cv: CvSection,
    pub output_dir: PathBuf,
    /// The file's text, copied into every run directory.
    pub source: String,
}

fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let source = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&source, base)
    }

    pub fn parse(source: &str, base: &Path) -> anyhow::Result<Self> {
        let raw: RawConfig = toml::from_str(source).map_err(|e| usage(format!("config: {e}")))?;
        let family: ModelFamily = match raw.model.get("family") {
            Some(v) => v.clone().try_into().map_err(|e| usage(format!("config [model] family: {e}")))?,
            None => ModelFamily::BilstmCrf,
        };
        let preset = TrainConfig::preset(family);
        let mut model = toml::Table::try_from(&preset.model)?;
        merge(&mut model, &raw.model);
        let mut optimizer = toml::Table::try_from(&preset.optimizer)?;
        merge(&mut optimizer, &raw.optimizer);
        let train = TrainConfig {
            model: toml::Value::Table(model).try_into().map_err(|e| usage(format!("config [model]: {e}")))?,
            optimizer: toml::Value::Table(optimizer).try_into().map_err(|e| usage(format!("config [optimizer]: {e}")))?,
            seed: raw.seed,
            folds: raw.cv.folds,
        };
        train.validate().map_err(|e| usage(format!("config: {e}")))?;
        let grid = raw.cv.grid();
        if grid.is_empty() {
            return Err(usage("config [cv]: empty hyperparameter grid"));
        }
        let distinct: BTreeSet<String> = grid.iter().map(|p| format!("{p:?}")).collect();
        if distinct.len() != grid.len() {
            return Err(usage("config [cv]: repeated grid values"));
        }
        let paths = raw.data.resolved(base);
        for (key, p) in paths.entries() {
            if !p.exists() {
                return Err(usage(format!("config [data] {key}: {} does not exist", p.display())));
            }
        }
        Ok(Self {
            train,
            data: raw.data,
            paths,
            cv: raw.cv,
            output_dir: base.join(raw.output_dir.unwrap_or_else(|| PathBuf::from("runs"))),
            source: source.to_string(),
        })
    }

    /// Canonical JSON of everything that determines a run's results.
    pub fn canonical_json(&self) -> String {
        serde_json::json!({ "train": self.train, "data": self.data, "cv": self.cv }).to_string()
    }

    /// `<output_dir>/run-<first 12 hex digits of the config hash>-seed<seed>`
    pub fn run_dir(&self) -> PathBuf {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        let hash = hex::encode(digest);
        self.output_dir.join(format!("run-{}-seed{}", &hash[..12], self.train.seed))
    }
}
