//! Inverted index with TF-IDF and Okapi BM25 scoring.
//!
//! TF-IDF uses length-normalised term frequency and the smoothed idf
//! `ln(|C| / (1 + df))`, summed over distinct query terms. The smoothed idf
//! goes negative for terms present in every article; that is kept as is.
//!
//! BM25 uses the Robertson idf `ln(1 + (N - df + 0.5) / (df + 0.5))`, which is
//! never negative, and sums over every query-term occurrence.
//!
//! Terms are token surfaces folded to lowercase.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rank::top_positions;
use crate::segment::{Segmenter, Token};

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.surface
    }
}

/// Normalised index term for a token surface.
pub fn term_key(surface: &str) -> String {
    surface.to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    k1: f64,
    b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1 > 0.0 && k1.is_finite()) {
            return Err(Error::invalid(format!("bm25 k1 must be > 0, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::invalid(format!("bm25 b must be in [0, 1], got {b}")));
        }
        Ok(Bm25Params { k1, b })
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LexicalScorer {
    TfIdf,
    Bm25(Bm25Params),
}

impl Default for LexicalScorer {
    fn default() -> Self {
        LexicalScorer::Bm25(Bm25Params::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub article: u32,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    article_ids: Vec<String>,
    positions: HashMap<String, usize>,
    doc_len: Vec<u32>,
    avg_len: f64,
    postings: BTreeMap<String, Vec<Posting>>,
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus, seg: &Segmenter) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::invalid("cannot index an empty corpus"));
        }
        let docs = corpus
            .articles()
            .iter()
            .map(|a| (a.article_id.clone(), seg.surfaces(&a.text)));
        Self::from_tokenized(docs)
    }

    /// Builds from pre-tokenised articles, in the given order.
    pub fn from_tokenized<I, S>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<S>)>,
        S: AsRef<str>,
    {
        let mut article_ids = Vec::new();
        let mut doc_len = Vec::new();
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (pos, (id, tokens)) in docs.into_iter().enumerate() {
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in &tokens {
                *counts.entry(term_key(t.as_ref())).or_default() += 1;
            }
            for (term, count) in counts {
                postings.entry(term).or_default().push(Posting {
                    article: pos as u32,
                    count,
                });
            }
            article_ids.push(id);
            doc_len.push(tokens.len() as u32);
        }
        Self::assemble(article_ids, doc_len, postings)
    }

    fn assemble(
        article_ids: Vec<String>,
        doc_len: Vec<u32>,
        postings: BTreeMap<String, Vec<Posting>>,
    ) -> Result<Self> {
        if article_ids.is_empty() {
            return Err(Error::invalid("cannot index an empty corpus"));
        }
        let mut positions = HashMap::with_capacity(article_ids.len());
        for (i, id) in article_ids.iter().enumerate() {
            if positions.insert(id.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate article id `{id}`")));
            }
        }
        let avg_len = mean_len(&doc_len);
        Ok(InvertedIndex {
            article_ids,
            positions,
            doc_len,
            avg_len,
            postings,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.article_ids.len()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn article_ids(&self) -> &[String] {
        &self.article_ids
    }

    pub fn position(&self, article_id: &str) -> Option<usize> {
        self.positions.get(article_id).copied()
    }

    pub fn doc_len(&self, article_id: &str) -> Option<u32> {
        self.position(article_id).map(|p| self.doc_len[p])
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(&term_key(term)).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(&term_key(term)).map_or(&[], Vec::as_slice)
    }

    pub fn term_count(&self, term: &str, article_id: &str) -> u32 {
        let Some(pos) = self.position(article_id) else {
            return 0;
        };
        count_in(self.postings(term), pos)
    }

    pub fn tfidf_score<S: AsRef<str>>(&self, query: &[S], article_id: &str) -> Result<f64> {
        self.score(query, article_id, LexicalScorer::TfIdf)
    }

    pub fn bm25_score<S: AsRef<str>>(
        &self,
        query: &[S],
        article_id: &str,
        params: Bm25Params,
    ) -> Result<f64> {
        self.score(query, article_id, LexicalScorer::Bm25(params))
    }

    pub fn score<S: AsRef<str>>(
        &self,
        query: &[S],
        article_id: &str,
        scorer: LexicalScorer,
    ) -> Result<f64> {
        let pos = self
            .position(article_id)
            .ok_or_else(|| Error::UnknownArticle(article_id.to_owned()))?;
        let mut total = 0.0;
        for term in self.query_terms(query, scorer) {
            let postings = self.postings(&term);
            let count = count_in(postings, pos);
            if count > 0 {
                total += self.contribution(scorer, postings.len(), count, self.doc_len[pos]);
            }
        }
        Ok(total)
    }

    /// Scores every article, in index order. Accumulates term by term in the
    /// same order as [`score`](Self::score), so the values are bit-identical.
    pub fn score_all<S: AsRef<str>>(&self, query: &[S], scorer: LexicalScorer) -> Vec<f64> {
        let mut acc = vec![0.0; self.doc_count()];
        for term in self.query_terms(query, scorer) {
            let postings = self.postings(&term);
            for p in postings {
                let pos = p.article as usize;
                acc[pos] += self.contribution(scorer, postings.len(), p.count, self.doc_len[pos]);
            }
        }
        acc
    }

    pub fn rank<S: AsRef<str>>(
        &self,
        query: &[S],
        scorer: LexicalScorer,
        top_k: usize,
    ) -> Result<Vec<(String, f64)>> {
        if top_k == 0 {
            return Err(Error::invalid("top_k must be at least 1"));
        }
        let scores = self.score_all(query, scorer);
        Ok(top_positions(&self.article_ids, &scores, top_k)
            .into_iter()
            .map(|p| (self.article_ids[p].clone(), scores[p]))
            .collect())
    }

    fn query_terms<S: AsRef<str>>(&self, query: &[S], scorer: LexicalScorer) -> Vec<String> {
        let keys = query.iter().map(|t| term_key(t.as_ref()));
        match scorer {
            LexicalScorer::Bm25(_) => keys.collect(),
            LexicalScorer::TfIdf => {
                let mut seen = HashSet::new();
                keys.filter(|k| seen.insert(k.clone())).collect()
            }
        }
    }

    fn contribution(&self, scorer: LexicalScorer, df: usize, count: u32, len: u32) -> f64 {
        let n = self.doc_count() as f64;
        let df = df as f64;
        let f = count as f64;
        match scorer {
            LexicalScorer::TfIdf => (f / len as f64) * (n / (1.0 + df)).ln(),
            LexicalScorer::Bm25(p) => {
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                let norm = 1.0 - p.b + p.b * len as f64 / self.avg_len;
                idf * f * (p.k1 + 1.0) / (f + p.k1 * norm)
            }
        }
    }

    /// Serialises to the line-delimited index format: a header line, one line
    /// per article (`{"article","len"}`), then one line per term
    /// (`{"term","postings":[[article_pos,count],..]}`) in term order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let header = IndexHeader {
            format: INDEX_FORMAT.into(),
            version: INDEX_VERSION,
            doc_count: self.doc_count(),
            avg_len: self.avg_len,
            terms: self.postings.len(),
        };
        writeln!(out, "{}", serde_json::to_string(&header).expect("serializable")).unwrap();
        for (id, &len) in self.article_ids.iter().zip(&self.doc_len) {
            let line = ArticleLine {
                article: id.clone(),
                len,
            };
            writeln!(out, "{}", serde_json::to_string(&line).expect("serializable")).unwrap();
        }
        for (term, postings) in &self.postings {
            let line = TermLine {
                term: term.clone(),
                postings: postings.iter().map(|p| (p.article, p.count)).collect(),
            };
            writeln!(out, "{}", serde_json::to_string(&line).expect("serializable")).unwrap();
        }
        out
    }

    pub fn from_text(input: &str) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let (line_no, first) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
        let header: IndexHeader =
            serde_json::from_str(first).map_err(|e| Error::parse(line_no, e.to_string()))?;
        if header.format != INDEX_FORMAT || header.version != INDEX_VERSION {
            return Err(Error::parse(line_no, "unsupported index format or version"));
        }
        let mut article_ids = Vec::with_capacity(header.doc_count.min(1 << 20));
        let mut doc_len = Vec::with_capacity(header.doc_count.min(1 << 20));
        for _ in 0..header.doc_count {
            let (line_no, raw) = lines
                .next()
                .ok_or_else(|| Error::parse(line_no, "truncated article table"))?;
            let line: ArticleLine =
                serde_json::from_str(raw).map_err(|e| Error::parse(line_no, e.to_string()))?;
            article_ids.push(line.article);
            doc_len.push(line.len);
        }
        let mut postings = BTreeMap::new();
        let mut term_lens = vec![0u64; doc_len.len()];
        for (line_no, raw) in lines {
            let line: TermLine =
                serde_json::from_str(raw).map_err(|e| Error::parse(line_no, e.to_string()))?;
            let mut list = Vec::with_capacity(line.postings.len());
            let mut prev: Option<u32> = None;
            for (article, count) in line.postings {
                if count == 0 || (article as usize) >= doc_len.len() {
                    return Err(Error::parse(line_no, "posting out of range"));
                }
                if prev.is_some_and(|p| p >= article) {
                    return Err(Error::parse(line_no, "postings not strictly increasing"));
                }
                prev = Some(article);
                term_lens[article as usize] += count as u64;
                list.push(Posting { article, count });
            }
            if list.is_empty() {
                return Err(Error::parse(line_no, "term without postings"));
            }
            if term_key(&line.term) != line.term || postings.insert(line.term, list).is_some() {
                return Err(Error::parse(line_no, "duplicate or unnormalised term"));
            }
        }
        if postings.len() != header.terms {
            return Err(Error::Integrity(format!(
                "header declares {} terms, found {}",
                header.terms,
                postings.len()
            )));
        }
        if term_lens.iter().zip(&doc_len).any(|(&sum, &len)| sum != len as u64) {
            return Err(Error::Integrity("article lengths disagree with postings".into()));
        }
        let index = Self::assemble(article_ids, doc_len, postings)?;
        if index.avg_len.to_bits() != header.avg_len.to_bits() {
            return Err(Error::Integrity("stored average length does not match".into()));
        }
        Ok(index)
    }
}

const INDEX_FORMAT: &str = "regqa-index";
const INDEX_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct IndexHeader {
    format: String,
    version: u32,
    doc_count: usize,
    avg_len: f64,
    terms: usize,
}

#[derive(Serialize, Deserialize)]
struct ArticleLine {
    article: String,
    len: u32,
}

#[derive(Serialize, Deserialize)]
struct TermLine {
    term: String,
    postings: Vec<(u32, u32)>,
}

fn mean_len(doc_len: &[u32]) -> f64 {
    let total: u64 = doc_len.iter().map(|&l| l as u64).sum();
    total as f64 / doc_len.len() as f64
}

fn count_in(postings: &[Posting], pos: usize) -> u32 {
    postings
        .binary_search_by_key(&(pos as u32), |p| p.article)
        .map_or(0, |i| postings[i].count)
}
