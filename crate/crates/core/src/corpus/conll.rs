//! CoNLL files: one `token<TAB>tag` per line, a blank line after every
//! sentence, and `-DOCSTART-<TAB>O` followed by a blank line opening each
//! document. Files without document markers are read as one document per
//! sentence.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const DOCSTART: &str = "-DOCSTART-";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConllSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    /// 1-based line number of the first token.
    pub first_line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConllDocument {
    pub doc_id: String,
    pub sentences: Vec<ConllSentence>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConllLine {
    Blank,
    DocStart,
    Token { token: String, tag: String },
}

pub fn read_conll_lines(reader: impl BufRead) -> Result<Vec<ConllLine>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            out.push(ConllLine::Blank);
            continue;
        }
        let mut fields = line.split('\t');
        let token = fields.next().unwrap_or_default();
        let tag = fields.next_back().ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected token<TAB>tag, got {line:?}"),
        })?;
        if token.starts_with(DOCSTART) {
            out.push(ConllLine::DocStart);
        } else {
            out.push(ConllLine::Token {
                token: token.to_string(),
                tag: tag.to_string(),
            });
        }
    }
    Ok(out)
}

/// Groups raw lines into documents of sentences.
pub fn group_lines(lines: &[ConllLine]) -> Vec<ConllDocument> {
    let has_docstart = lines.contains(&ConllLine::DocStart);
    let mut docs: Vec<ConllDocument> = Vec::new();
    let mut cur: Option<ConllSentence> = None;
    let new_doc = |docs: &mut Vec<ConllDocument>| {
        let id = format!("doc{}", docs.len());
        docs.push(ConllDocument {
            doc_id: id,
            sentences: Vec::new(),
        });
    };
    let close = |docs: &mut Vec<ConllDocument>, cur: &mut Option<ConllSentence>| {
        if let Some(s) = cur.take() {
            if !has_docstart || docs.is_empty() {
                new_doc(docs);
            }
            docs.last_mut().expect("doc").sentences.push(s);
        }
    };
    for (i, line) in lines.iter().enumerate() {
        match line {
            ConllLine::Blank => close(&mut docs, &mut cur),
            ConllLine::DocStart => {
                close(&mut docs, &mut cur);
                new_doc(&mut docs);
            }
            ConllLine::Token { token, tag } => {
                let s = cur.get_or_insert_with(|| ConllSentence {
                    tokens: Vec::new(),
                    tags: Vec::new(),
                    first_line: i + 1,
                });
                s.tokens.push(token.clone());
                s.tags.push(tag.clone());
            }
        }
    }
    close(&mut docs, &mut cur);
    docs
}

pub fn read_conll(reader: impl BufRead) -> Result<Vec<ConllDocument>> {
    Ok(group_lines(&read_conll_lines(reader)?))
}

pub fn write_conll(w: &mut impl Write, docs: &[ConllDocument]) -> Result<()> {
    for d in docs {
        write!(w, "{DOCSTART}\tO\n\n")?;
        for s in &d.sentences {
            for (tok, tag) in s.tokens.iter().zip(&s.tags) {
                writeln!(w, "{tok}\t{tag}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}
