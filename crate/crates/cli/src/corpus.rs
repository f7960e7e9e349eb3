//! `convert` and `stats`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};

use nerkit::corpus::{
    assign_partitions, convert_documents, corpus_stats, parse_pubtator, read_conll, read_i2b2_dir, read_id_list,
    resolve_labels, write_conll, Document, LabelScheme, Partition, SentenceRule,
};
use nerkit::eval::decode_entities;
use nerkit::tokenize::{whitespace_tokenize, word_tokenize, TokenizedText};
use nerkit::CorpusStats;

use crate::config::usage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Pubtator,
    I2b2,
    Conll,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    I2b2,
    MedmentionsFull,
    MedmentionsSt21pv,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Tokenizer {
    Word,
    Whitespace,
}

impl Tokenizer {
    pub fn function(self) -> fn(&str) -> TokenizedText {
        match self {
            Tokenizer::Word => word_tokenize,
            Tokenizer::Whitespace => whitespace_tokenize,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sentences {
    Punctuation,
    Newline,
    Document,
}

impl From<Sentences> for SentenceRule {
    fn from(s: Sentences) -> Self {
        match s {
            Sentences::Punctuation => SentenceRule::Punctuation,
            Sentences::Newline => SentenceRule::Newline,
            Sentences::Document => SentenceRule::Document,
        }
    }
}

#[derive(Args, Debug)]
pub struct CorpusArgs {
    /// Input layout: a PubTator file, an i2b2 directory (notes plus concept files) or a CoNLL file
    #[arg(long, value_enum)]
    pub format: Format,
    #[arg(long)]
    pub input: PathBuf,
    /// Label inventory; defaults to i2b2 for i2b2 input and medmentions-full otherwise
    #[arg(long, value_enum)]
    pub scheme: Option<Scheme>,
    /// Comma-separated types of the custom scheme
    #[arg(long, value_delimiter = ',')]
    pub types: Vec<String>,
    /// Directory with corpus_pubtator_pmids_{trng,dev,test}.txt
    #[arg(long)]
    pub pmids: Option<PathBuf>,
    /// Defaults to whitespace for i2b2 and word otherwise
    #[arg(long, value_enum)]
    pub tokenizer: Option<Tokenizer>,
    /// Defaults to newline for i2b2 and punctuation otherwise
    #[arg(long, value_enum)]
    pub sentences: Option<Sentences>,
}

impl CorpusArgs {
    fn tokenizer(&self) -> Tokenizer {
        self.tokenizer.unwrap_or(if self.format == Format::I2b2 { Tokenizer::Whitespace } else { Tokenizer::Word })
    }

    fn sentences(&self) -> Sentences {
        self.sentences.unwrap_or(if self.format == Format::I2b2 { Sentences::Newline } else { Sentences::Punctuation })
    }

    fn scheme_choice(&self) -> anyhow::Result<Scheme> {
        let scheme = self.scheme.unwrap_or(if self.format == Format::I2b2 { Scheme::I2b2 } else { Scheme::MedmentionsFull });
        if scheme == Scheme::Custom && self.types.is_empty() {
            return Err(usage("--scheme custom needs --types"));
        }
        if scheme != Scheme::Custom && !self.types.is_empty() {
            return Err(usage("--types only applies to --scheme custom"));
        }
        Ok(scheme)
    }

    fn scheme(&self, docs: &[Document]) -> anyhow::Result<LabelScheme> {
        Ok(match self.scheme_choice()? {
            Scheme::I2b2 => LabelScheme::i2b2(),
            Scheme::MedmentionsFull => LabelScheme::from_documents(docs),
            Scheme::MedmentionsSt21pv => LabelScheme::medmentions_st21pv(),
            Scheme::Custom => LabelScheme::closed(self.types.iter().cloned()),
        })
    }

    fn documents(&self) -> anyhow::Result<Vec<Document>> {
        self.scheme_choice()?;
        if !self.input.exists() {
            return Err(usage(format!("{} does not exist", self.input.display())));
        }
        let mut docs = match self.format {
            Format::Pubtator => {
                let f = File::open(&self.input).with_context(|| format!("opening {}", self.input.display()))?;
                parse_pubtator(BufReader::new(f)).with_context(|| format!("reading {}", self.input.display()))?
            }
            Format::I2b2 => read_i2b2_dir(&self.input)?,
            Format::Conll => unreachable!("CoNLL input carries no documents"),
        };
        if let Some(dir) = &self.pmids {
            let ids = |split: &str| -> anyhow::Result<Vec<String>> {
                let p = dir.join(format!("corpus_pubtator_pmids_{split}.txt"));
                let f = File::open(&p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                Ok(read_id_list(BufReader::new(f))?)
            };
            assign_partitions(&mut docs, &ids("trng")?, &ids("dev")?, &ids("test")?);
            let unassigned = docs.iter().filter(|d| d.partition == Partition::Unassigned).count();
            if unassigned > 0 {
                log::warn!("{unassigned} documents are in no split list and were left out");
            }
        }
        Ok(docs)
    }

    /// Named document groups: the three splits when split lists are given,
    /// otherwise the whole corpus.
    fn groups(&self, docs: &[Document]) -> Vec<(&'static str, Vec<Document>)> {
        let pick = |ps: &[Partition]| docs.iter().filter(|d| ps.contains(&d.partition)).cloned().collect::<Vec<_>>();
        if self.pmids.is_some() {
            vec![
                ("train", pick(&[Partition::Train])),
                ("dev", pick(&[Partition::Dev])),
                ("test", pick(&[Partition::Test])),
            ]
        } else {
            vec![("corpus", docs.to_vec())]
        }
    }
}

fn stats_of(docs: &[Document], scheme: &LabelScheme, tokenizer: Tokenizer) -> anyhow::Result<CorpusStats> {
    let counts: Vec<usize> = docs.iter().map(|d| tokenizer.function()(&d.text).len()).collect();
    let resolved: Vec<Document> = docs.iter().cloned().map(|d| resolve_labels(d, scheme)).collect();
    Ok(corpus_stats(&resolved, &counts, scheme)?)
}

fn document_stats(args: &CorpusArgs) -> anyhow::Result<BTreeMap<String, CorpusStats>> {
    let docs = args.documents()?;
    let scheme = args.scheme(&docs)?;
    let mut out = BTreeMap::new();
    for (name, group) in args.groups(&docs) {
        out.insert(name.to_string(), stats_of(&group, &scheme, args.tokenizer())?);
    }
    if args.pmids.is_some() {
        let joined: Vec<Document> = docs
            .iter()
            .filter(|d| matches!(d.partition, Partition::Train | Partition::Dev))
            .cloned()
            .collect();
        out.insert("train+dev".to_string(), stats_of(&joined, &scheme, args.tokenizer())?);
    }
    Ok(out)
}

/// Statistics of an IOB file: documents are `-DOCSTART-` blocks.
pub fn conll_stats(path: &Path) -> anyhow::Result<CorpusStats> {
    let f = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let docs = read_conll(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
    let mut stats = CorpusStats {
        num_documents: docs.len(),
        ..CorpusStats::default()
    };
    for (d, doc) in docs.iter().enumerate() {
        for (s, sent) in doc.sentences.iter().enumerate() {
            stats.num_tokens += sent.tokens.len();
            for e in decode_entities(&sent.tags, &format!("{d}/{s}")).with_context(|| format!("line {}", sent.first_line))? {
                *stats.per_type.entry(e.label).or_default() += 1;
                stats.num_entities += 1;
            }
        }
    }
    stats.num_types = stats.per_type.len();
    Ok(stats)
}

pub fn render_stats(stats: &BTreeMap<String, CorpusStats>) -> String {
    let mut s = format!("{:<10} {:>10} {:>12} {:>12} {:>6}\n", "split", "documents", "tokens", "entities", "types");
    for (name, st) in stats {
        s.push_str(&format!(
            "{:<10} {:>10} {:>12} {:>12} {:>6}\n",
            name, st.num_documents, st.num_tokens, st.num_entities, st.num_types
        ));
    }
    s
}

pub fn stats(args: &CorpusArgs) -> anyhow::Result<()> {
    let stats = if args.format == Format::Conll {
        BTreeMap::from([("corpus".to_string(), conll_stats(&args.input)?)])
    } else {
        document_stats(args)?
    };
    print!("{}", render_stats(&stats));
    Ok(())
}

pub fn convert(args: &CorpusArgs, output: &Path) -> anyhow::Result<()> {
    if args.format == Format::Conll {
        return Err(usage("convert reads pubtator or i2b2 input"));
    }
    let docs = args.documents()?;
    let scheme = args.scheme(&docs)?;
    fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
    let mut stats = BTreeMap::new();
    for (name, group) in args.groups(&docs) {
        let converted = convert_documents(group, &scheme, args.tokenizer().function(), args.sentences().into())?;
        let path = output.join(format!("{name}.conll"));
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        write_conll(&mut w, &converted.documents)?;
        w.flush()?;
        stats.insert(name.to_string(), converted.stats);
    }
    if args.pmids.is_some() {
        let joined: Vec<Document> = docs
            .iter()
            .filter(|d| matches!(d.partition, Partition::Train | Partition::Dev))
            .cloned()
            .collect();
        stats.insert("train+dev".to_string(), stats_of(&joined, &scheme, args.tokenizer())?);
    }
    fs::write(output.join("stats.json"), serde_json::to_string_pretty(&stats)? + "\n")?;
    print!("{}", render_stats(&stats));
    Ok(())
}
