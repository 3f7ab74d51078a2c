//! Documents, articles and QA pairs, plus their line-oriented file formats.
//!
//! Corpus file: one JSON object per line, either
//! `{"type":"document","id":..,"title":..}` or
//! `{"type":"article","id":..,"doc_id":..,"title":..,"text":..}`.
//! Records may appear in any order; a document's article list follows the
//! order in which its articles appear in the file.
//!
//! QA file: one JSON object per line with `qa_id`, `question`, `article_id`,
//! `extractive_answer` (spans joined by `#`) and `abstractive_answer`.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, QaIssue, Result};
use crate::segment::{Segmenter, Token};

/// Separator between spans of a multi-span extractive answer.
pub const SPAN_SEPARATOR: char = '#';

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub article_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Article {
    pub article_id: String,
    pub doc_id: String,
    pub title: String,
    pub text: String,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    articles: Vec<Article>,
    doc_pos: HashMap<String, usize>,
    article_pos: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CorpusRecord {
    Document {
        id: String,
        title: String,
    },
    Article {
        id: String,
        doc_id: String,
        title: String,
        text: String,
    },
}

impl Corpus {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with(path, &Segmenter::whitespace())
    }

    pub fn load_with(path: impl AsRef<Path>, seg: &Segmenter) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&raw, seg)
    }

    /// Parses the corpus file format from an in-memory string.
    pub fn parse(input: &str, seg: &Segmenter) -> Result<Self> {
        let mut records = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: CorpusRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(idx + 1, e.to_string()))?;
            records.push(rec);
        }
        Self::from_records(records, seg)
    }

    pub fn from_records(records: Vec<CorpusRecord>, seg: &Segmenter) -> Result<Self> {
        let mut corpus = Corpus::default();
        let mut pending = Vec::new();
        for rec in records {
            match rec {
                CorpusRecord::Document { id, title } => {
                    if corpus.doc_pos.contains_key(&id) {
                        return Err(Error::Integrity(format!("duplicate document id `{id}`")));
                    }
                    corpus.doc_pos.insert(id.clone(), corpus.documents.len());
                    corpus.documents.push(Document {
                        doc_id: id,
                        title,
                        article_ids: Vec::new(),
                    });
                }
                CorpusRecord::Article {
                    id,
                    doc_id,
                    title,
                    text,
                } => {
                    if corpus.article_pos.contains_key(&id) {
                        return Err(Error::Integrity(format!("duplicate article id `{id}`")));
                    }
                    corpus.article_pos.insert(id.clone(), corpus.articles.len());
                    pending.push(doc_id.clone());
                    let tokens = seg.segment(&text);
                    corpus.articles.push(Article {
                        article_id: id,
                        doc_id,
                        title,
                        text,
                        tokens,
                    });
                }
            }
        }
        for (article, doc_id) in corpus.articles.iter().zip(pending) {
            let &pos = corpus.doc_pos.get(&doc_id).ok_or_else(|| {
                Error::Integrity(format!(
                    "article `{}` references unknown document `{doc_id}`",
                    article.article_id
                ))
            })?;
            corpus.documents[pos].article_ids.push(article.article_id.clone());
        }
        if let Some(empty) = corpus.documents.iter().find(|d| d.article_ids.is_empty()) {
            return Err(Error::Integrity(format!(
                "document `{}` has no articles",
                empty.doc_id
            )));
        }
        Ok(corpus)
    }

    /// Re-serializes to the corpus file format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.documents {
            let rec = CorpusRecord::Document {
                id: d.doc_id.clone(),
                title: d.title.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("serializable"));
            out.push('\n');
        }
        for a in &self.articles {
            let rec = CorpusRecord::Article {
                id: a.article_id.clone(),
                doc_id: a.doc_id.clone(),
                title: a.title.clone(),
                text: a.text.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn article(&self, article_id: &str) -> Option<&Article> {
        self.article_pos.get(article_id).map(|&i| &self.articles[i])
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.doc_pos.get(doc_id).map(|&i| &self.documents[i])
    }

    /// Document that owns the given article.
    pub fn document_of(&self, article_id: &str) -> Option<&Document> {
        self.article(article_id).and_then(|a| self.document(&a.doc_id))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub qa_id: String,
    pub question: String,
    pub article_id: String,
    pub extractive_answer: String,
    pub abstractive_answer: String,
}

impl QaPair {
    /// The individual spans of the `#`-joined extractive answer.
    pub fn spans(&self) -> impl Iterator<Item = &str> {
        self.extractive_answer.split(SPAN_SEPARATOR)
    }

    fn check(&self, corpus: &Corpus) -> std::result::Result<(), String> {
        let article = corpus
            .article(&self.article_id)
            .ok_or_else(|| format!("unknown article `{}`", self.article_id))?;
        for span in self.spans() {
            if span.is_empty() {
                return Err("empty extractive span".into());
            }
            if !article.text.contains(span) {
                return Err(format!("span `{span}` not found in `{}`", self.article_id));
            }
        }
        Ok(())
    }
}

pub fn load_qa_dataset(path: impl AsRef<Path>, corpus: &Corpus) -> Result<Vec<QaPair>> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_qa_dataset(&raw, corpus)
}

/// Parses and validates QA records. All failing records are reported together.
pub fn parse_qa_dataset(input: &str, corpus: &Corpus) -> Result<Vec<QaPair>> {
    let mut pairs = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: QaPair =
            serde_json::from_str(line).map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        pairs.push(pair);
    }
    validate_qa(&pairs, corpus)?;
    Ok(pairs)
}

pub fn validate_qa(pairs: &[QaPair], corpus: &Corpus) -> Result<()> {
    let mut seen = HashSet::new();
    let mut issues = Vec::new();
    for p in pairs {
        if !seen.insert(p.qa_id.as_str()) {
            issues.push(QaIssue {
                qa_id: p.qa_id.clone(),
                reason: "duplicate qa_id".into(),
            });
            continue;
        }
        if let Err(reason) = p.check(corpus) {
            issues.push(QaIssue {
                qa_id: p.qa_id.clone(),
                reason,
            });
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(issues))
    }
}

pub fn qa_to_jsonl(pairs: &[QaPair]) -> String {
    pairs
        .iter()
        .map(|p| serde_json::to_string(p).expect("serializable") + "\n")
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<QaPair>,
    pub dev: Vec<QaPair>,
    pub test: Vec<QaPair>,
}

/// Split sizes for `n` records: 80% / 10% floored, remainder to test.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 8 / 10;
    let dev = n / 10;
    (train, dev, n - train - dev)
}

/// Seeded 8:1:1 shuffle split.
pub fn split_dataset(mut pairs: Vec<QaPair>, seed: u64) -> Result<Splits> {
    if pairs.len() < 10 {
        return Err(Error::invalid(format!(
            "need at least 10 QA pairs to split, got {}",
            pairs.len()
        )));
    }
    let (n_train, n_dev, _) = split_sizes(pairs.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pairs.shuffle(&mut rng);
    let test = pairs.split_off(n_train + n_dev);
    let dev = pairs.split_off(n_train);
    Ok(Splits {
        train: pairs,
        dev,
        test,
    })
}
