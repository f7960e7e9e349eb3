//! PubTator blocks:
//!
//! ```text
//! 25763772|t|DCTN4 as a modifier of chronic Pseudomonas aeruginosa infection
//! 25763772|a|Pseudomonas aeruginosa (Pa) infection ...
//! 25763772<TAB>0<TAB>5<TAB>DCTN4<TAB>T116,T123<TAB>C4308010
//! ```
//!
//! Title and abstract are joined with one space; mention offsets address the
//! joined text in characters.

use std::io::BufRead;

use super::{char_slice, Document, Mention, Partition};
use crate::error::{Error, Result};

#[derive(Default)]
struct Block {
    id: Option<String>,
    title: Option<String>,
    abstract_: Option<String>,
    mentions: Vec<(usize, Mention)>,
    first_line: usize,
}

pub fn parse_pubtator(reader: impl BufRead) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut block = Block::default();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if block.id.is_some() {
                docs.push(finish(std::mem::take(&mut block))?);
            }
            continue;
        }
        if block.id.is_none() {
            block.first_line = lineno;
        }
        if let Some((id, kind, body)) = split_text_line(line) {
            check_id(&mut block, id, lineno)?;
            let slot = match kind {
                "t" => &mut block.title,
                "a" => &mut block.abstract_,
                _ => unreachable!(),
            };
            if slot.is_some() {
                return Err(parse_err(lineno, format!("duplicate |{kind}| line")));
            }
            *slot = Some(body.to_string());
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(5..=6).contains(&fields.len()) {
            return Err(parse_err(
                lineno,
                format!("expected 5 or 6 tab-separated fields, found {}", fields.len()),
            ));
        }
        check_id(&mut block, fields[0], lineno)?;
        let start = parse_offset(fields[1], lineno)?;
        let end = parse_offset(fields[2], lineno)?;
        if start >= end {
            return Err(parse_err(lineno, format!("empty or inverted span {start}..{end}")));
        }
        let raw_types: Vec<String> = fields[4]
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect();
        if raw_types.is_empty() {
            return Err(parse_err(lineno, "mention without a type"));
        }
        block.mentions.push((
            lineno,
            Mention {
                start_char: start,
                end_char: end,
                surface: fields[3].to_string(),
                raw_types,
                resolved_type: None,
                concept: fields.get(5).map(|c| c.to_string()),
            },
        ));
    }
    if block.id.is_some() {
        docs.push(finish(block)?);
    }
    Ok(docs)
}

fn split_text_line(line: &str) -> Option<(&str, &str, &str)> {
    let mut parts = line.splitn(3, '|');
    let id = parts.next()?;
    let kind = parts.next()?;
    let body = parts.next()?;
    if (kind == "t" || kind == "a") && !id.contains('\t') {
        Some((id, kind, body))
    } else {
        None
    }
}

fn check_id(block: &mut Block, id: &str, line: usize) -> Result<()> {
    match &block.id {
        None => {
            block.id = Some(id.to_string());
            Ok(())
        }
        Some(cur) if cur == id => Ok(()),
        Some(cur) => Err(parse_err(
            line,
            format!("document id {id} inside block of {cur} (missing blank line?)"),
        )),
    }
}

fn parse_offset(s: &str, line: usize) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("bad offset {s:?}")))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn finish(block: Block) -> Result<Document> {
    let doc_id = block.id.expect("block has id");
    let title = block
        .title
        .ok_or_else(|| parse_err(block.first_line, format!("document {doc_id} has no |t| line")))?;
    let text = match block.abstract_ {
        Some(a) => format!("{title} {a}"),
        None => title,
    };
    let n_chars = text.chars().count();
    let mut mentions = Vec::with_capacity(block.mentions.len());
    for (_, m) in block.mentions {
        let found = if m.end_char <= n_chars {
            char_slice(&text, m.start_char, m.end_char).unwrap_or_default()
        } else {
            String::new()
        };
        if found != m.surface {
            return Err(Error::OffsetMismatch {
                doc_id,
                start: m.start_char,
                end: m.end_char,
                expected: m.surface,
                found,
            });
        }
        mentions.push(m);
    }
    Ok(Document {
        doc_id,
        text,
        mentions,
        partition: Partition::Unassigned,
    })
}
