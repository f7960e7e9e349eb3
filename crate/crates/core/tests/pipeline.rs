use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use nerkit::corpus::{convert_documents, parse_pubtator, read_conll, read_i2b2_dir, write_conll, LabelScheme, SentenceRule};
use nerkit::models::{BiLstmConfig, EmbeddingConfig, ModelFamily, Resources};
use nerkit::tokenize::{whitespace_tokenize, word_tokenize};
use nerkit::training::{kfold_cv, Example, GridPoint, TrainConfig};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn conll_string(docs: &[nerkit::corpus::ConllDocument]) -> String {
    let mut b = Vec::new();
    write_conll(&mut b, docs).unwrap();
    String::from_utf8(b).unwrap()
}

#[test]
fn pubtator_conversion_matches_golden_file() {
    let docs = parse_pubtator(BufReader::new(File::open(fixture("toy.pubtator")).unwrap())).unwrap();
    let scheme = LabelScheme::from_documents(&docs);
    let c = convert_documents(docs, &scheme, word_tokenize, SentenceRule::Punctuation).unwrap();
    let golden = fs::read_to_string(fixture("toy_pubtator.golden.conll")).unwrap();
    assert_eq!(conll_string(&c.documents), golden);
    // The nested "kidney" mention counts in statistics but not in the tags.
    assert_eq!(c.stats.num_entities, 11);
    assert_eq!(c.stats.num_documents, 2);
    assert_eq!(c.stats.num_tokens, 31);
    assert!(!golden.contains("T023"));
}

#[test]
fn closed_scheme_folds_unlisted_types() {
    let docs = parse_pubtator(BufReader::new(File::open(fixture("toy.pubtator")).unwrap())).unwrap();
    let c = convert_documents(docs, &LabelScheme::medmentions_st21pv(), word_tokenize, SentenceRule::Punctuation).unwrap();
    let expected: BTreeMap<String, usize> = [("T098".to_string(), 1), ("UnknownType".to_string(), 10)].into();
    assert_eq!(c.stats.per_type, expected);
    assert_eq!(c.stats.num_types, 2);
}

#[test]
fn i2b2_directory_converts_line_by_line() {
    let docs = read_i2b2_dir(&fixture("i2b2")).unwrap();
    assert_eq!(docs.len(), 1);
    let c = convert_documents(docs, &LabelScheme::i2b2(), whitespace_tokenize, SentenceRule::Newline).unwrap();
    assert_eq!(c.documents[0].sentences.len(), 12);
    let s = &c.documents[0].sentences[9];
    assert_eq!(s.tokens.join(" "), "The patient is feeling weaker than usual today .");
    assert_eq!(s.tags.join(" "), "O O O O B-problem I-problem I-problem O O");
    assert_eq!(c.stats.num_tokens, 65);
    assert_eq!(c.stats.num_entities, 7);

    // Written output reads back to the same sentences.
    let back = read_conll(conll_string(&c.documents).as_bytes()).unwrap();
    assert_eq!(back[0].sentences.len(), 12);
    assert_eq!(back[0].sentences[9].tags, s.tags);
}

#[test]
fn cross_validation_with_one_grid_point_selects_it() {
    let docs = read_conll(BufReader::new(File::open(fixture("toy_train.conll")).unwrap())).unwrap();
    let examples: Vec<Example> = Example::from_conll(&docs[..4]);
    let mut config = TrainConfig::preset(ModelFamily::BilstmCrf);
    config.model.embedding = EmbeddingConfig { word_dim: 8, char_dim: 4, char_inner_dim: 4 };
    config.model.bilstm = BiLstmConfig { num_layers: 1, hidden_total: 8 };
    config.folds = 2;
    let point = GridPoint { batch_size: 4, peak_lr: 1e-2, epochs: 2 };
    let result = kfold_cv(&examples, &[point], &config, &Resources::default()).unwrap();
    assert_eq!(result.chosen, point);
    assert_eq!(result.scores.len(), 1);
    assert_eq!(result.scores[0].fold_f1.len(), 2);
    let mean = result.scores[0].fold_f1.iter().sum::<f64>() / 2.0;
    assert!((result.scores[0].mean_f1 - mean).abs() < 1e-12);
}
