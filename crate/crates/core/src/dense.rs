//! Article embeddings, query embedders and cosine ranking.
//!
//! Embedding file: one JSON object per line, `{"id": article_id, "vector": [..]}`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result, TransportError};
use crate::rank::top_positions;
use crate::segment::Segmenter;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    positions: HashMap<String, usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub vector: Vec<f64>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(EmbeddingStore {
            dim,
            ids: Vec::new(),
            vectors: Vec::new(),
            positions: HashMap::new(),
        })
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                id,
                expected: self.dim,
                actual: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite component in vector `{id}`")));
        }
        if self.positions.contains_key(&id) {
            return Err(Error::Integrity(format!("duplicate embedding id `{id}`")));
        }
        self.positions.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.vectors.push(vector);
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&raw, expected_dim)
    }

    /// Parses the embedding file format. Without `expected_dim` the first
    /// record fixes the dimension.
    pub fn parse(input: &str, expected_dim: Option<usize>) -> Result<Self> {
        let mut store: Option<EmbeddingStore> = None;
        for (idx, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(idx + 1, e.to_string()))?;
            let store = match &mut store {
                Some(s) => s,
                None => store.insert(EmbeddingStore::new(
                    expected_dim.unwrap_or(rec.vector.len()),
                )?),
            };
            store.insert(rec.id, rec.vector)?;
        }
        store.ok_or_else(|| Error::invalid("embedding file contains no vectors"))
    }

    /// Embeds every article text with `embedder`.
    pub fn from_embedder(corpus: &Corpus, embedder: &dyn QueryEmbedder) -> Result<Self> {
        let mut store = EmbeddingStore::new(embedder.dim())?;
        for a in corpus.articles() {
            store.insert(a.article_id.clone(), embedder.embed(&a.text)?)?;
        }
        Ok(store)
    }

    pub fn to_jsonl(&self) -> String {
        self.ids
            .iter()
            .zip(&self.vectors)
            .map(|(id, v)| {
                let rec = EmbeddingRecord {
                    id: id.clone(),
                    vector: v.clone(),
                };
                serde_json::to_string(&rec).expect("serializable") + "\n"
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, id: &str) -> Option<&[f64]> {
        self.positions.get(id).map(|&i| self.vectors[i].as_slice())
    }

    /// Ids from `wanted` that have no vector.
    pub fn missing<'a>(&self, wanted: impl IntoIterator<Item = &'a String>) -> Vec<String> {
        wanted
            .into_iter()
            .filter(|id| !self.positions.contains_key(*id))
            .cloned()
            .collect()
    }

    /// Cosine of `query` against every stored vector, in store order.
    pub fn cosine_all(&self, query: &[f64]) -> Result<Vec<f64>> {
        self.check_query(query)?;
        self.vectors.iter().map(|v| cosine_similarity(query, v)).collect()
    }

    pub(crate) fn check_query(&self, query: &[f64]) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::Dimension {
                id: "<query>".into(),
                expected: self.dim,
                actual: query.len(),
            });
        }
        Ok(())
    }

    /// Cosine ranking with scores min-max normalised over the whole store
    /// before truncation.
    pub fn rank(
        &self,
        question: &str,
        embedder: &dyn QueryEmbedder,
        top_k: usize,
    ) -> Result<Vec<(String, f64)>> {
        if top_k == 0 {
            return Err(Error::invalid("top_k must be at least 1"));
        }
        if embedder.dim() != self.dim {
            return Err(Error::Dimension {
                id: "<embedder>".into(),
                expected: self.dim,
                actual: embedder.dim(),
            });
        }
        let query = embedder.embed(question)?;
        let scores = min_max_normalize(&self.cosine_all(&query)?)?;
        Ok(top_positions(&self.ids, &scores, top_k)
            .into_iter()
            .map(|p| (self.ids[p].clone(), scores[p]))
            .collect())
    }
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            id: "<vector>".into(),
            expected: u.len(),
            actual: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Affine rescale onto [0, 1]; a constant list maps to all 1.0.
pub fn min_max_normalize(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot normalise an empty score list"));
    }
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![1.0; scores.len()]);
    }
    let range = max - min;
    Ok(scores.iter().map(|s| (s - min) / range).collect())
}

/// Turns question text into a vector.
pub trait QueryEmbedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, TransportError>;
}

/// Deterministic bag-of-hashed-tokens vector. Useful for tests and offline
/// runs; it carries lexical overlap only, no semantics.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    seg: Segmenter,
}

impl HashingEmbedder {
    pub fn new(dim: usize, seg: Segmenter) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(HashingEmbedder { dim, seg })
    }
}

impl QueryEmbedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, TransportError> {
        let mut v = vec![0.0; self.dim];
        for surface in self.seg.surfaces(text) {
            let h = fnv1a(surface.to_lowercase().as_bytes());
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        }
        // keeps empty or fully cancelled inputs away from the zero vector
        v[0] += 1e-3;
        Ok(v)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Looks question vectors up in a precomputed file of
/// `{"text": question, "vector": [..]}` lines.
#[derive(Debug, Clone)]
pub struct FileLookupEmbedder {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

#[derive(Deserialize)]
struct LookupRecord {
    text: String,
    vector: Vec<f64>,
}

impl FileLookupEmbedder {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&raw)
    }

    pub fn parse(input: &str) -> Result<Self> {
        let mut dim = None;
        let mut vectors = HashMap::new();
        for (idx, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: LookupRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(idx + 1, e.to_string()))?;
            let d = *dim.get_or_insert(rec.vector.len());
            if rec.vector.len() != d || d == 0 {
                return Err(Error::Dimension {
                    id: rec.text,
                    expected: d,
                    actual: rec.vector.len(),
                });
            }
            vectors.insert(rec.text, rec.vector);
        }
        let dim = dim.ok_or_else(|| Error::invalid("query vector file is empty"))?;
        Ok(FileLookupEmbedder { dim, vectors })
    }
}

impl QueryEmbedder for FileLookupEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, TransportError> {
        self.vectors
            .get(text)
            .cloned()
            .ok_or_else(|| TransportError::Unavailable(format!("no stored vector for `{text}`")))
    }
}
