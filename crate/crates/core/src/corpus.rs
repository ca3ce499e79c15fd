//! Corpus loading, preprocessing, indexing and persistence.
//!
//! Input is pre-tokenized JSONL, one document per line:
//!
//! ```text
//! {"id": "doc-1", "sentences": [{"tokens": ["we", "study"], "label": "Objective"}]}
//! ```
//!
//! Labels are optional, but a document either labels every sentence or none.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("label count mismatch in document {id:?}: {labels} labels for {sentences} sentences")]
    LabelCountMismatch {
        id: String,
        labels: usize,
        sentences: usize,
    },
    #[error("unknown token {token:?} in document {id:?}")]
    UnknownToken { id: String, token: String },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("invalid preprocessing config: {0}")]
    InvalidConfig(&'static str),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A document as read from disk, before filtering and indexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub id: String,
    pub sentences: Vec<Vec<String>>,
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawCorpus {
    pub documents: Vec<RawDocument>,
}

impl RawCorpus {
    pub fn new(documents: Vec<RawDocument>) -> Result<Self, CorpusError> {
        let mut ids = HashSet::new();
        for doc in &documents {
            if !ids.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
            if let Some(labels) = &doc.labels {
                if labels.len() != doc.sentences.len() {
                    return Err(CorpusError::LabelCountMismatch {
                        id: doc.id.clone(),
                        labels: labels.len(),
                        sentences: doc.sentences.len(),
                    });
                }
            }
        }
        Ok(Self { documents })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonSentence {
    tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonDocument {
    id: String,
    sentences: Vec<JsonSentence>,
}

impl JsonDocument {
    fn into_raw(self) -> Result<RawDocument, CorpusError> {
        let num_sentences = self.sentences.len();
        let num_labels = self.sentences.iter().filter(|s| s.label.is_some()).count();
        if num_labels != 0 && num_labels != num_sentences {
            return Err(CorpusError::LabelCountMismatch {
                id: self.id,
                labels: num_labels,
                sentences: num_sentences,
            });
        }
        let mut sentences = Vec::with_capacity(num_sentences);
        let mut labels = Vec::with_capacity(num_labels);
        for s in self.sentences {
            sentences.push(s.tokens);
            labels.extend(s.label);
        }
        Ok(RawDocument {
            id: self.id,
            sentences,
            labels: (num_labels > 0).then_some(labels),
        })
    }
}

/// Parses corpus JSONL from any reader. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<RawCorpus, CorpusError> {
    let mut documents = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: "<reader>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: JsonDocument =
            serde_json::from_str(&line).map_err(|source| CorpusError::Parse { line: i + 1, source })?;
        documents.push(doc.into_raw()?);
    }
    RawCorpus::new(documents)
}

pub fn load_corpus(path: &Path) -> Result<RawCorpus, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_corpus(BufReader::new(file))
}

pub fn write_raw_corpus<W: Write>(raw: &RawCorpus, mut writer: W) -> Result<(), CorpusError> {
    let to_io = |e: std::io::Error| CorpusError::Io {
        path: "<writer>".into(),
        source: e,
    };
    for doc in &raw.documents {
        let sentences = doc
            .sentences
            .iter()
            .enumerate()
            .map(|(s, tokens)| JsonSentence {
                tokens: tokens.clone(),
                label: doc.labels.as_ref().map(|l| l[s].clone()),
            })
            .collect();
        let json = JsonDocument {
            id: doc.id.clone(),
            sentences,
        };
        serde_json::to_writer(&mut writer, &json).map_err(|e| to_io(e.into()))?;
        writer.write_all(b"\n").map_err(to_io)?;
    }
    Ok(())
}

/// Reads a stopword file: one word per line, `#` comments and blanks ignored.
pub fn load_stopwords(path: &Path) -> Result<HashSet<String>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_stopwords(&text))
}

pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Bijection between word strings and ids `0..V`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_words(words: Vec<String>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(CorpusError::InvalidVocabulary(format!("duplicate word {w:?}")));
            }
        }
        Ok(Self { words, index })
    }

    fn intern(&mut self, word: &str) -> usize {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.words.len();
        self.words.push(word.to_owned());
        self.index.insert(word.to_owned(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    words: Vec<String>,
}

pub fn write_vocabulary(vocab: &Vocabulary, path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(io_err(path))?;
    let body = VocabularyFile {
        words: vocab.words.clone(),
    };
    serde_json::to_writer(BufWriter::new(file), &body).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e.into(),
    })
}

pub fn load_vocabulary(path: &Path) -> Result<Vocabulary, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let file: VocabularyFile =
        serde_json::from_str(&text).map_err(|source| CorpusError::Parse { line: 1, source })?;
    Vocabulary::from_words(file.words)
}

/// An indexed document. Intent labels, when present, are ids into the
/// corpus [`LabelSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Vec<usize>>,
    pub labels: Option<Vec<usize>>,
}

impl Document {
    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

/// Label names in order of first appearance; the position is the intent id.
pub type LabelSet = Vocabulary;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub vocabulary: Vocabulary,
    pub labels: Option<LabelSet>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub docs: usize,
    pub sentences: usize,
    pub vocab: usize,
    pub tokens: usize,
}

impl Corpus {
    /// Indexes a raw corpus as-is. With `vocabulary` given, ids follow it and
    /// unknown tokens are an error; otherwise ids are assigned in order of
    /// first appearance.
    pub fn index(raw: &RawCorpus, vocabulary: Option<Vocabulary>) -> Result<Self, CorpusError> {
        let fixed = vocabulary.is_some();
        let mut vocab = vocabulary.unwrap_or_default();
        let mut label_set = LabelSet::default();
        let mut documents = Vec::with_capacity(raw.documents.len());
        for doc in &raw.documents {
            let mut sentences = Vec::with_capacity(doc.sentences.len());
            for tokens in &doc.sentences {
                let ids = tokens
                    .iter()
                    .map(|t| {
                        if fixed {
                            vocab.id(t).ok_or_else(|| CorpusError::UnknownToken {
                                id: doc.id.clone(),
                                token: t.clone(),
                            })
                        } else {
                            Ok(vocab.intern(t))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                sentences.push(ids);
            }
            let labels = doc
                .labels
                .as_ref()
                .map(|ls| ls.iter().map(|l| label_set.intern(l)).collect());
            documents.push(Document {
                id: doc.id.clone(),
                sentences,
                labels,
            });
        }
        Ok(Self {
            documents,
            vocabulary: vocab,
            labels: (!label_set.is_empty()).then_some(label_set),
        })
    }

    pub fn to_raw(&self) -> RawCorpus {
        let documents = self
            .documents
            .iter()
            .map(|doc| RawDocument {
                id: doc.id.clone(),
                sentences: doc
                    .sentences
                    .iter()
                    .map(|s| s.iter().map(|&w| self.vocabulary.word(w).to_owned()).collect())
                    .collect(),
                labels: doc.labels.as_ref().map(|ls| {
                    let set = self.labels.as_ref().expect("labels imply a label set");
                    ls.iter().map(|&l| set.word(l).to_owned()).collect()
                }),
            })
            .collect();
        RawCorpus { documents }
    }

    pub fn num_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.as_ref().map_or(0, LabelSet::len)
    }

    pub fn stats(&self) -> CorpusStats {
        corpus_stats(self)
    }

    /// Writes the corpus JSONL and its sidecar vocabulary file.
    pub fn save(&self, corpus_path: &Path, vocab_path: &Path) -> Result<(), CorpusError> {
        let file = File::create(corpus_path).map_err(io_err(corpus_path))?;
        let mut writer = BufWriter::new(file);
        write_raw_corpus(&self.to_raw(), &mut writer)?;
        writer.flush().map_err(io_err(corpus_path))?;
        write_vocabulary(&self.vocabulary, vocab_path)
    }

    /// Loads a corpus written by [`Corpus::save`].
    pub fn load(corpus_path: &Path, vocab_path: &Path) -> Result<Self, CorpusError> {
        let raw = load_corpus(corpus_path)?;
        let vocab = load_vocabulary(vocab_path)?;
        Self::index(&raw, Some(vocab))
    }
}

pub fn corpus_stats(c: &Corpus) -> CorpusStats {
    CorpusStats {
        docs: c.documents.len(),
        sentences: c.documents.iter().map(|d| d.sentences.len()).sum(),
        vocab: c.vocabulary.len(),
        tokens: c.documents.iter().map(Document::num_tokens).sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub stopwords: HashSet<String>,
    pub min_token_count: usize,
    pub min_sentence_tokens: usize,
    pub drop_non_alphabetic: bool,
    pub drop_length_one: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            stopwords: HashSet::new(),
            min_token_count: 3,
            min_sentence_tokens: 5,
            drop_non_alphabetic: true,
            drop_length_one: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.min_token_count < 1 {
            return Err(CorpusError::InvalidConfig("min_token_count must be at least 1"));
        }
        if self.min_sentence_tokens < 1 {
            return Err(CorpusError::InvalidConfig("min_sentence_tokens must be at least 1"));
        }
        Ok(())
    }

    fn keeps(&self, token: &str) -> bool {
        if self.stopwords.contains(token) {
            return false;
        }
        if self.drop_non_alphabetic && !token.chars().all(char::is_alphabetic) {
            return false;
        }
        if self.drop_length_one && token.chars().count() <= 1 {
            return false;
        }
        !token.is_empty()
    }
}

/// Applies the token and sentence filters and indexes the survivors.
///
/// Order: lowercase, stopwords, non-alphabetic, length one, then the
/// frequency and sentence-length rules. The last two are repeated until
/// nothing changes, since dropping a sentence can push a word under the
/// frequency threshold.
pub fn preprocess(raw: &RawCorpus, cfg: &PreprocessConfig) -> Result<Corpus, CorpusError> {
    cfg.validate()?;
    // (id, sentences, labels) per document.
    let mut docs: Vec<(String, Vec<Vec<String>>, Option<Vec<String>>)> = raw
        .documents
        .iter()
        .map(|doc| {
            let sentences = doc
                .sentences
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|t| t.to_lowercase())
                        .filter(|t| cfg.keeps(t))
                        .collect()
                })
                .collect();
            (doc.id.clone(), sentences, doc.labels.clone())
        })
        .collect();

    loop {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for (_, sentences, _) in &docs {
            for t in sentences.iter().flatten() {
                *freq.entry(t.as_str()).or_default() += 1;
            }
        }
        let rare: HashSet<String> = freq
            .into_iter()
            .filter(|&(_, n)| n < cfg.min_token_count)
            .map(|(t, _)| t.to_owned())
            .collect();

        let mut changed = !rare.is_empty();
        for (_, sentences, labels) in docs.iter_mut() {
            for s in sentences.iter_mut() {
                s.retain(|t| !rare.contains(t));
            }
            let keep: Vec<bool> = sentences
                .iter()
                .map(|s| s.len() >= cfg.min_sentence_tokens)
                .collect();
            if keep.iter().any(|k| !k) {
                changed = true;
                let mut it = keep.iter();
                sentences.retain(|_| *it.next().unwrap());
                if let Some(ls) = labels {
                    let mut it = keep.iter();
                    ls.retain(|_| *it.next().unwrap());
                }
            }
        }
        docs.retain(|(_, sentences, _)| !sentences.is_empty());
        if !changed {
            break;
        }
    }

    let filtered = RawCorpus {
        documents: docs
            .into_iter()
            .map(|(id, sentences, labels)| RawDocument { id, sentences, labels })
            .collect(),
    };
    Corpus::index(&filtered, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn doc(id: &str, sentences: &[&str]) -> RawDocument {
        RawDocument {
            id: id.into(),
            sentences: sentences.iter().map(|s| toks(s)).collect(),
            labels: None,
        }
    }

    fn raw(docs: Vec<RawDocument>) -> RawCorpus {
        RawCorpus::new(docs).unwrap()
    }

    #[test]
    fn load_two_documents() {
        let text = r#"{"id":"a","sentences":[{"tokens":["x","y"],"label":"B"},{"tokens":["z"],"label":"M"},{"tokens":[],"label":"B"}]}
{"id":"b","sentences":[{"tokens":["x"]},{"tokens":["y"]},{"tokens":["z"]}]}
"#;
        let c = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(c.documents.len(), 2);
        assert_eq!(c.documents[0].sentences.len(), 3);
        assert_eq!(c.documents[1].sentences.len(), 3);
        assert_eq!(
            c.documents[0].labels.as_deref(),
            Some(&["B".to_string(), "M".into(), "B".into()][..])
        );
        assert_eq!(c.documents[1].labels, None);
    }

    #[test]
    fn load_errors() {
        let partial = r#"{"id":"a","sentences":[{"tokens":["x"],"label":"B"},{"tokens":["y"]}]}"#;
        let err = read_corpus(partial.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("label count mismatch"), "{err}");

        let dup = "{\"id\":\"a\",\"sentences\":[]}\n{\"id\":\"a\",\"sentences\":[]}\n";
        assert!(matches!(read_corpus(dup.as_bytes()), Err(CorpusError::DuplicateId(_))));

        let bad = "{\"id\":\"a\",\"sentences\":[]}\nnot json\n";
        assert!(matches!(read_corpus(bad.as_bytes()), Err(CorpusError::Parse { line: 2, .. })));

        let mismatch = RawDocument {
            id: "a".into(),
            sentences: vec![toks("x y")],
            labels: Some(vec![]),
        };
        assert!(matches!(
            RawCorpus::new(vec![mismatch]),
            Err(CorpusError::LabelCountMismatch { .. })
        ));
    }

    #[test]
    fn empty_file() {
        assert_eq!(read_corpus("".as_bytes()).unwrap().documents.len(), 0);
        let c = preprocess(&RawCorpus::default(), &PreprocessConfig::default()).unwrap();
        assert_eq!(c.stats(), CorpusStats::default());
    }

    #[test]
    fn stats_direct_count() {
        let c = Corpus::index(&raw(vec![doc("d", &["aa bb cc dd ee"])]), None).unwrap();
        assert_eq!(
            c.stats(),
            CorpusStats {
                docs: 1,
                sentences: 1,
                vocab: 5,
                tokens: 5
            }
        );
    }

    fn repeated(sentence: &str, times: usize) -> Vec<&str> {
        vec![sentence; times]
    }

    #[test]
    fn token_filters() {
        let cfg = PreprocessConfig {
            stopwords: parse_stopwords("# common\nthe\n\n"),
            ..Default::default()
        };
        let mut sentences = repeated("alpha beta gamma delta epsilon a x9y The", 3);
        sentences.push("alpha beta gamma delta rare");
        sentences.push("alpha beta gamma delta epsilon rare");
        let c = preprocess(&raw(vec![doc("d", &sentences)]), &cfg).unwrap();
        for w in ["a", "x9y", "the", "rare"] {
            assert!(c.vocabulary.id(w).is_none(), "{w} should be filtered");
        }
        // "alpha beta gamma delta rare" loses "rare" and falls to 4 tokens.
        assert_eq!(c.documents[0].sentences.len(), 4);
        assert!(c.documents[0].sentences.iter().all(|s| s.len() == 5));
    }

    #[test]
    fn min_count_uses_post_filter_frequency() {
        // "Word" appears 3 times only after lowercasing merges it with "word".
        let sentences = ["word aa bb cc dd", "Word aa bb cc dd", "WORD aa bb cc dd"];
        let c = preprocess(&raw(vec![doc("d", &sentences)]), &PreprocessConfig::default()).unwrap();
        assert!(c.vocabulary.id("word").is_some());
    }

    #[test]
    fn dropping_sentences_cascades_to_counts_and_documents() {
        // "tail" occurs 3 times but one occurrence sits in a short sentence.
        let sentences = [
            "tail aa bb cc dd",
            "tail aa bb cc dd",
            "tail ee",
        ];
        let mut docs = vec![doc("d", &sentences)];
        docs.push(doc("empty", &["ee ee"]));
        let c = preprocess(&raw(docs), &PreprocessConfig::default()).unwrap();
        assert!(c.vocabulary.id("tail").is_none());
        // Without "tail", remaining sentences have 4 tokens; everything goes.
        assert_eq!(c.stats(), CorpusStats::default());
    }

    #[test]
    fn labels_follow_dropped_sentences() {
        let mut d = doc("d", &["aa bb cc dd ee", "aa bb", "aa bb cc dd ee", "aa bb cc dd ee"]);
        d.labels = Some(vec!["x".into(), "y".into(), "z".into(), "x".into()]);
        let c = preprocess(&raw(vec![d]), &PreprocessConfig::default()).unwrap();
        let set = c.labels.as_ref().unwrap();
        let names: Vec<&str> = c.documents[0]
            .labels
            .as_ref()
            .unwrap()
            .iter()
            .map(|&l| set.word(l))
            .collect();
        assert_eq!(names, vec!["x", "z", "x"]);
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = doc("d", &["aa bb cc dd ee", "bb cc dd ee aa", "cc dd ee aa bb"]);
        d.labels = Some(vec!["p".into(), "q".into(), "p".into()]);
        let c = preprocess(&raw(vec![d]), &PreprocessConfig::default()).unwrap();
        let (cp, vp) = (dir.path().join("c.jsonl"), dir.path().join("v.json"));
        c.save(&cp, &vp).unwrap();
        assert_eq!(Corpus::load(&cp, &vp).unwrap(), c);
    }

    #[test]
    fn unknown_token_with_fixed_vocabulary() {
        let vocab = Vocabulary::from_words(vec!["aa".into()]).unwrap();
        let err = Corpus::index(&raw(vec![doc("d", &["aa bb"])]), Some(vocab)).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownToken { .. }));
    }

    #[test]
    fn invalid_config() {
        let cfg = PreprocessConfig {
            min_token_count: 0,
            ..Default::default()
        };
        assert!(preprocess(&RawCorpus::default(), &cfg).is_err());
    }
}
