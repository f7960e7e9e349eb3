//! `predict`.

use std::path::Path;

use anyhow::Context;
use clap::ValueEnum;

use nerkit::corpus::{convert_documents, write_conll, ConllDocument, Document, LabelScheme, Partition};
use nerkit::training::{predict_all, Example};

use crate::corpus::{Sentences, Tokenizer};
use crate::run::{load_tagger, read_documents, with_tags, write_conll_file};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// Plain text, tokenized and split into sentences here
    Text,
    /// Tokens of a CoNLL file; its tags are ignored
    Conll,
}

fn text_document(path: &Path, tokenizer: Tokenizer, sentences: Sentences) -> anyhow::Result<Vec<ConllDocument>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc = Document {
        doc_id: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        text,
        mentions: Vec::new(),
        partition: Partition::Unassigned,
    };
    let no_types = LabelScheme::closed(Vec::<String>::new());
    Ok(convert_documents(vec![doc], &no_types, tokenizer.function(), sentences.into())?.documents)
}

pub fn predict(
    checkpoint: &Path,
    input: &Path,
    format: InputFormat,
    tokenizer: Tokenizer,
    sentences: Sentences,
    output: Option<&Path>,
) -> anyhow::Result<()> {
    let tagger = load_tagger(checkpoint)?;
    let docs = match format {
        InputFormat::Text => text_document(input, tokenizer, sentences)?,
        InputFormat::Conll => read_documents(input)?,
    };
    let tags = predict_all(&tagger, &Example::from_conll(&docs))?;
    let out = with_tags(&docs, tags);
    match output {
        Some(p) => write_conll_file(p, &out)?,
        None => write_conll(&mut std::io::stdout().lock(), &out)?,
    }
    Ok(())
}
