use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Document, LabelScheme};
use crate::error::{Error, Result};

/// Dataset properties: types, documents, tokens, entities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// Distinct resolved types with at least one entity.
    pub num_types: usize,
    pub num_documents: usize,
    pub num_tokens: usize,
    pub num_entities: usize,
    pub per_type: BTreeMap<String, usize>,
}

/// Counts over resolved documents; `token_counts[i]` is the token count of `docs[i]`.
/// Unresolved mentions are resolved against `scheme` on the fly.
pub fn corpus_stats(docs: &[Document], token_counts: &[usize], scheme: &LabelScheme) -> Result<CorpusStats> {
    if docs.len() != token_counts.len() {
        return Err(Error::LengthMismatch(format!(
            "{} documents, {} token counts",
            docs.len(),
            token_counts.len()
        )));
    }
    let mut per_type: BTreeMap<String, usize> = BTreeMap::new();
    for m in docs.iter().flat_map(|d| &d.mentions) {
        let t = match &m.resolved_type {
            Some(t) => t.clone(),
            None => scheme.resolve(&m.raw_types),
        };
        *per_type.entry(t).or_default() += 1;
    }
    Ok(CorpusStats {
        num_types: per_type.len(),
        num_documents: docs.len(),
        num_tokens: token_counts.iter().sum(),
        num_entities: per_type.values().sum(),
        per_type,
    })
}
