use super::{
    corpus_stats, normalize_mentions, resolve_labels, split_sentences, to_iob, ConllDocument, ConllSentence,
    CorpusStats, Document, LabelScheme, SentenceRule,
};
use crate::error::Result;
use crate::tokenize::TokenizedText;

#[derive(Clone, Debug, PartialEq)]
pub struct Converted {
    pub documents: Vec<ConllDocument>,
    pub stats: CorpusStats,
}

/// Resolves labels, tokenizes with `tokenizer`, drops token-level overlaps, and emits IOB
/// sentences. Statistics count every resolved mention before overlap removal.
pub fn convert_documents(
    docs: Vec<Document>,
    scheme: &LabelScheme,
    tokenizer: fn(&str) -> TokenizedText,
    rule: SentenceRule,
) -> Result<Converted> {
    let mut resolved = Vec::with_capacity(docs.len());
    let mut token_counts = Vec::with_capacity(docs.len());
    let mut documents = Vec::with_capacity(docs.len());
    for doc in docs {
        let doc = resolve_labels(doc, scheme);
        let tokens = tokenizer(&doc.text).tokens;
        let kept = normalize_mentions(doc.clone(), &tokens)?;
        let seq = to_iob(&kept, &tokens)?;
        let sentences = split_sentences(&seq, &doc.text, rule)
            .into_iter()
            .map(|s| ConllSentence {
                tokens: s.tokens,
                tags: s.tags,
                first_line: 0,
            })
            .collect();
        documents.push(ConllDocument {
            doc_id: doc.doc_id.clone(),
            sentences,
        });
        token_counts.push(tokens.len());
        resolved.push(doc);
    }
    let stats = corpus_stats(&resolved, &token_counts, scheme)?;
    Ok(Converted { documents, stats })
}
