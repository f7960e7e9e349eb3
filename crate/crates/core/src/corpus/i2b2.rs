//! i2b2 2010 concept files.
//!
//! Each `.con` line reads `c="surface" L1:T1 L2:T2||t="type"`, where `L` is a
//! 1-based line number in the note and `T` a 0-based whitespace-token index
//! within that line, as in the shared-task release. The span is inclusive of
//! both endpoints.

use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use super::{Document, Mention, Partition};
use crate::error::{Error, Result};

pub const I2B2_TYPES: [&str; 3] = ["problem", "test", "treatment"];

struct LineTokens {
    /// Character offset where each token starts and ends.
    spans: Vec<(usize, usize)>,
    words: Vec<String>,
}

fn index_note(text: &str) -> Vec<LineTokens> {
    let mut lines = Vec::new();
    let mut cur = LineTokens {
        spans: Vec::new(),
        words: Vec::new(),
    };
    let mut word = String::new();
    let mut word_start = 0;
    let flush = |cur: &mut LineTokens, word: &mut String, start: usize, end: usize| {
        if !word.is_empty() {
            cur.spans.push((start, end));
            cur.words.push(std::mem::take(word));
        }
    };
    let mut pos = 0;
    for c in text.chars() {
        if c == '\n' {
            flush(&mut cur, &mut word, word_start, pos);
            lines.push(std::mem::replace(
                &mut cur,
                LineTokens {
                    spans: Vec::new(),
                    words: Vec::new(),
                },
            ));
        } else if c.is_whitespace() {
            flush(&mut cur, &mut word, word_start, pos);
        } else {
            if word.is_empty() {
                word_start = pos;
            }
            word.push(c);
        }
        pos += 1;
    }
    flush(&mut cur, &mut word, word_start, pos);
    lines.push(cur);
    lines
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_coord(s: &str, line: usize) -> Result<(usize, usize)> {
    let (l, t) = s
        .split_once(':')
        .ok_or_else(|| parse_err(line, format!("bad coordinate {s:?}")))?;
    let l: usize = l.parse().map_err(|_| parse_err(line, format!("bad line number {l:?}")))?;
    let t: usize = t.parse().map_err(|_| parse_err(line, format!("bad token index {t:?}")))?;
    if l == 0 {
        return Err(parse_err(line, "line numbers start at 1"));
    }
    Ok((l, t))
}

/// Parses one note and its concept lines into a [`Document`].
pub fn parse_i2b2(doc_id: &str, note_text: &str, concept_lines: impl BufRead) -> Result<Document> {
    let lines = index_note(note_text);
    let mut mentions = Vec::new();
    for (i, raw) in concept_lines.lines().enumerate() {
        let lineno = i + 1;
        let raw = raw?;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let (concept, ty) = raw
            .split_once("||t=\"")
            .ok_or_else(|| parse_err(lineno, "missing ||t=\"...\""))?;
        let ty = ty
            .strip_suffix('"')
            .ok_or_else(|| parse_err(lineno, "unterminated type"))?;
        if !I2B2_TYPES.contains(&ty) {
            return Err(parse_err(lineno, format!("unknown concept type {ty:?}")));
        }
        let body = concept
            .strip_prefix("c=\"")
            .ok_or_else(|| parse_err(lineno, "missing c=\"...\""))?;
        let close = body
            .rfind('"')
            .ok_or_else(|| parse_err(lineno, "unterminated surface"))?;
        let surface = &body[..close];
        let coords: Vec<&str> = body[close + 1..].split_whitespace().collect();
        if coords.len() != 2 {
            return Err(parse_err(lineno, "expected two coordinates"));
        }
        let (l1, t1) = parse_coord(coords[0], lineno)?;
        let (l2, t2) = parse_coord(coords[1], lineno)?;
        let locate = |l: usize, t: usize| -> Result<(usize, usize)> {
            lines
                .get(l - 1)
                .and_then(|lt| lt.spans.get(t).copied())
                .ok_or_else(|| {
                    parse_err(lineno, format!("coordinate {l}:{t} outside the note"))
                })
        };
        let (start, _) = locate(l1, t1)?;
        let (_, end) = locate(l2, t2)?;
        if (l2, t2) < (l1, t1) {
            return Err(parse_err(lineno, "span ends before it starts"));
        }
        let covered: Vec<&str> = (l1..=l2)
            .flat_map(|l| {
                let lt = &lines[l - 1];
                let lo = if l == l1 { t1 } else { 0 };
                let hi = if l == l2 { t2 + 1 } else { lt.words.len() };
                lt.words[lo..hi].iter().map(String::as_str)
            })
            .collect();
        let joined = covered.join(" ");
        if joined.to_lowercase() != surface.to_lowercase() {
            return Err(Error::OffsetMismatch {
                doc_id: doc_id.to_string(),
                start,
                end,
                expected: surface.to_string(),
                found: joined,
            });
        }
        mentions.push(Mention {
            start_char: start,
            end_char: end,
            surface: super::char_slice(note_text, start, end).unwrap_or_default(),
            raw_types: vec![ty.to_string()],
            resolved_type: None,
            concept: None,
        });
    }
    mentions.sort_by_key(|m| (m.start_char, m.end_char));
    Ok(Document {
        doc_id: doc_id.to_string(),
        text: note_text.to_string(),
        mentions,
        partition: Partition::Unassigned,
    })
}

fn collect_notes(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_notes(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "txt") {
            out.push(path);
        }
    }
    Ok(())
}

/// Concept file for a note: `<stem>.con` beside it, or in a sibling
/// `concept/` directory as in the release layout (`txt/`, `concept/`).
fn concept_path(note: &Path) -> Option<PathBuf> {
    let stem = note.file_stem()?;
    let con = Path::new(stem).with_extension("con");
    let dir = note.parent()?;
    let beside = dir.join(&con);
    if beside.is_file() {
        return Some(beside);
    }
    let sibling = dir.parent()?.join("concept").join(&con);
    sibling.is_file().then_some(sibling)
}

/// Reads every `*.txt` note under `dir` that has a concept file, ordered by
/// document id (the file stem). Notes without concepts are skipped with a warning.
pub fn read_i2b2_dir(dir: &Path) -> Result<Vec<Document>> {
    let mut notes = Vec::new();
    collect_notes(dir, &mut notes)?;
    notes.sort_by(|a, b| a.file_stem().cmp(&b.file_stem()).then(a.cmp(b)));
    let mut docs = Vec::with_capacity(notes.len());
    for note in notes {
        let Some(con) = concept_path(&note) else {
            log::warn!("{}: no concept file, skipped", note.display());
            continue;
        };
        let id = note.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let text = fs::read_to_string(&note)?;
        let concepts = fs::File::open(&con)?;
        docs.push(parse_i2b2(&id, &text, std::io::BufReader::new(concepts)).map_err(|e| match e {
            Error::Parse { line, msg } => Error::Parse {
                line,
                msg: format!("{}: {msg}", con.display()),
            },
            other => other,
        })?);
    }
    Ok(docs)
}
