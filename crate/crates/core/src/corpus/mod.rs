//! Annotated corpora: parsing, label resolution, IOB conversion, statistics.

mod conll;
mod convert;
mod i2b2;
mod iob;
mod pubtator;
mod stats;

pub use conll::{
    group_lines, read_conll, read_conll_lines, write_conll, ConllDocument, ConllLine, ConllSentence,
    DOCSTART,
};
pub use convert::{convert_documents, Converted};
pub use i2b2::{parse_i2b2, read_i2b2_dir, I2B2_TYPES};
pub use iob::{normalize_mentions, split_sentences, to_iob, LabeledSequence, SentenceRule};
pub use pubtator::parse_pubtator;
pub use stats::{corpus_stats, CorpusStats};

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Dev,
    Test,
    #[default]
    Unassigned,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    /// Character offset, inclusive.
    pub start_char: usize,
    /// Character offset, exclusive.
    pub end_char: usize,
    pub surface: String,
    /// Type IDs in annotation order.
    pub raw_types: Vec<String>,
    /// Set by [`resolve_labels`].
    pub resolved_type: Option<String>,
    /// Concept identifier, carried through untouched.
    pub concept: Option<String>,
}

impl Mention {
    pub fn len_chars(&self) -> usize {
        self.end_char - self.start_char
    }

    pub fn overlaps(&self, other: &Mention) -> bool {
        self.start_char < other.end_char && other.start_char < self.end_char
    }

    /// Resolved type, or the first raw type when unresolved.
    pub fn label(&self) -> &str {
        self.resolved_type
            .as_deref()
            .or(self.raw_types.first().map(String::as_str))
            .unwrap_or(LabelScheme::UNKNOWN)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub mentions: Vec<Mention>,
    pub partition: Partition,
}

/// Substring by character offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<String> {
    if start > end {
        return None;
    }
    let mut it = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b0 = it.nth(start)?;
    let b1 = if end == start { b0 } else { it.nth(end - start - 1)? };
    Some(text[b0..b1].to_string())
}

/// Semantic-type inventory and the IOB tag set derived from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelScheme {
    types: Vec<String>,
    open: bool,
    index: HashMap<String, usize>,
}

impl LabelScheme {
    pub const UNKNOWN: &'static str = "UnknownType";

    /// Inventory with an `UnknownType` class that absorbs types outside it.
    pub fn open<I, S>(types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut t: Vec<String> = types.into_iter().map(Into::into).collect();
        if !t.iter().any(|x| x == Self::UNKNOWN) {
            t.push(Self::UNKNOWN.to_string());
        }
        Self::build(t, true)
    }

    /// Inventory without a fallback class.
    pub fn closed<I, S>(types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::build(types.into_iter().map(Into::into).collect(), false)
    }

    fn build(mut types: Vec<String>, open: bool) -> Self {
        let mut seen = BTreeSet::new();
        types.retain(|t| seen.insert(t.clone()));
        let index = types.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { types, open, index }
    }

    pub fn i2b2() -> Self {
        Self::closed(I2B2_TYPES)
    }

    /// The 21 semantic types of the MedMentions st21pv release.
    pub fn medmentions_st21pv() -> Self {
        Self::open([
            "T005", "T007", "T017", "T022", "T031", "T033", "T037", "T038", "T058", "T062",
            "T074", "T082", "T091", "T092", "T097", "T098", "T103", "T168", "T170", "T201",
            "T204",
        ])
    }

    /// Open inventory of every first-listed type seen in `docs`, sorted.
    pub fn from_documents(docs: &[Document]) -> Self {
        let types: BTreeSet<&str> = docs
            .iter()
            .flat_map(|d| &d.mentions)
            .filter_map(|m| m.raw_types.first().map(String::as_str))
            .collect();
        Self::open(types)
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn contains(&self, t: &str) -> bool {
        self.index.contains_key(t)
    }

    /// `O`, then `B-t`, `I-t` for every type in inventory order.
    pub fn tags(&self) -> Vec<String> {
        let mut tags = vec!["O".to_string()];
        for t in &self.types {
            tags.push(format!("B-{t}"));
            tags.push(format!("I-{t}"));
        }
        tags
    }

    pub fn num_tags(&self) -> usize {
        2 * self.types.len() + 1
    }

    /// First raw type if it is in the inventory, else `UnknownType` (open
    /// schemes) or the raw type itself (closed schemes).
    pub fn resolve(&self, raw_types: &[String]) -> String {
        match raw_types.first() {
            Some(t) if self.contains(t) => t.clone(),
            Some(t) if !self.open => t.clone(),
            _ => Self::UNKNOWN.to_string(),
        }
    }
}

/// Keeps only the first listed type of every mention.
pub fn resolve_labels(mut doc: Document, scheme: &LabelScheme) -> Document {
    for m in &mut doc.mentions {
        m.resolved_type = Some(scheme.resolve(&m.raw_types));
    }
    doc
}

/// Sets partitions from id lists; documents in none of them stay unassigned.
pub fn assign_partitions(docs: &mut [Document], train: &[String], dev: &[String], test: &[String]) {
    let lookup: HashMap<&str, Partition> = train
        .iter()
        .map(|id| (id.as_str(), Partition::Train))
        .chain(dev.iter().map(|id| (id.as_str(), Partition::Dev)))
        .chain(test.iter().map(|id| (id.as_str(), Partition::Test)))
        .collect();
    for d in docs {
        d.partition = lookup.get(d.doc_id.as_str()).copied().unwrap_or_default();
    }
}

/// One id per non-empty line, as in published split files.
pub fn read_id_list(reader: impl std::io::BufRead) -> crate::Result<Vec<String>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() {
            out.push(id.to_string());
        }
    }
    Ok(out)
}

/// Documents in any of `parts`. MedMentions "Train" is `[Train, Dev]`.
pub fn select_partitions<'a>(docs: &'a [Document], parts: &[Partition]) -> Vec<&'a Document> {
    docs.iter().filter(|d| parts.contains(&d.partition)).collect()
}
