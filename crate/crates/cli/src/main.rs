//! `nerkit`: convert corpora, train and cross-validate taggers, score and compare predictions.
//!
//! Exit status is 0 on success, 1 when a command fails at run time, and 2
//! for invalid arguments or configuration.

mod config;
mod corpus;
mod evaluate;
mod predict;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{RunConfig, UsageError};
use crate::corpus::{CorpusArgs, Sentences, Tokenizer};
use crate::predict::InputFormat;

#[derive(Parser, Debug)]
#[command(name = "nerkit", version, about = "Clinical and biomedical entity recognition")]
struct Cli {
    /// Log progress (repeat for more detail); RUST_LOG overrides
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert an annotated corpus to CoNLL IOB files plus statistics
    Convert {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Output directory
        #[arg(long)]
        output: PathBuf,
    },
    /// Print corpus statistics
    Stats {
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Train a tagger from a run configuration
    Train(RunArgs),
    /// Select fine-tuning hyperparameters by k-fold cross-validation
    Cv(RunArgs),
    /// Score predictions against gold with strict entity matching
    Eval {
        gold: PathBuf,
        pred: PathBuf,
        /// Also write report.json and report.txt here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List gold entities found by only one of two systems
    Compare {
        gold: PathBuf,
        pred_a: PathBuf,
        pred_b: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tag text with a trained checkpoint and print CoNLL
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: InputFormat,
        #[arg(long, value_enum, default_value = "word")]
        tokenizer: Tokenizer,
        #[arg(long, value_enum, default_value = "punctuation")]
        sentences: Sentences,
        /// Write here instead of standard output
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// TOML run configuration
    config: PathBuf,
    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Convert { corpus, output } => corpus::convert(&corpus, &output),
        Command::Stats { corpus } => corpus::stats(&corpus),
        Command::Train(args) => run::train(&args.load()?).map(drop),
        Command::Cv(args) => run::cross_validate(&args.load()?).map(drop),
        Command::Eval { gold, pred, out } => evaluate::eval(&gold, &pred, out.as_deref()),
        Command::Compare { gold, pred_a, pred_b, out } => evaluate::compare(&gold, &pred_a, &pred_b, out.as_deref()),
        Command::Predict { checkpoint, input, format, tokenizer, sentences, output } => {
            predict::predict(&checkpoint, &input, format, tokenizer, sentences, output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
