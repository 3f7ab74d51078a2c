//! On-disk index directory: `index.jsonl`, `embeddings.jsonl` and a
//! `manifest.json` holding SHA-256 digests of both plus the source corpus.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dense::EmbeddingStore;
use crate::error::{Error, Result};
use crate::lexical::InvertedIndex;

pub const INDEX_FILE: &str = "index.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

const FORMAT: &str = "regqa-artifacts";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub articles: usize,
    pub dim: usize,
    pub corpus_sha256: String,
    pub index_sha256: String,
    pub embeddings_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the three files, creating `dir` if needed. `corpus_bytes` is the
/// corpus file as read from disk.
pub fn write_artifacts(
    dir: &Path,
    corpus_bytes: &[u8],
    index: &InvertedIndex,
    store: &EmbeddingStore,
) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let index_text = index.to_text();
    let store_text = store.to_jsonl();
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        articles: index.doc_count(),
        dim: store.dim(),
        corpus_sha256: sha256_hex(corpus_bytes),
        index_sha256: sha256_hex(index_text.as_bytes()),
        embeddings_sha256: sha256_hex(store_text.as_bytes()),
    };
    let manifest_text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    for (name, body) in [
        (INDEX_FILE, index_text.as_str()),
        (EMBEDDINGS_FILE, store_text.as_str()),
        (MANIFEST_FILE, manifest_text.as_str()),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(manifest)
}

/// Loads and verifies an index directory. With `corpus_bytes`, also checks
/// that the corpus is the one the index was built from.
pub fn read_artifacts(
    dir: &Path,
    corpus_bytes: Option<&[u8]>,
) -> Result<(InvertedIndex, EmbeddingStore, Manifest)> {
    let read = |name: &str| {
        let path = dir.join(name);
        std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
    };
    let manifest: Manifest = serde_json::from_str(&read(MANIFEST_FILE)?)
        .map_err(|e| Error::Integrity(format!("{MANIFEST_FILE}: {e}")))?;
    if manifest.format != FORMAT || manifest.version != VERSION {
        return Err(Error::Integrity(format!(
            "unsupported artifact format {} v{}",
            manifest.format, manifest.version
        )));
    }
    if let Some(bytes) = corpus_bytes {
        if sha256_hex(bytes) != manifest.corpus_sha256 {
            return Err(Error::Integrity(
                "corpus changed since the index was built; rebuild it".into(),
            ));
        }
    }
    let index_text = read(INDEX_FILE)?;
    let store_text = read(EMBEDDINGS_FILE)?;
    for (name, text, want) in [
        (INDEX_FILE, &index_text, &manifest.index_sha256),
        (EMBEDDINGS_FILE, &store_text, &manifest.embeddings_sha256),
    ] {
        if &sha256_hex(text.as_bytes()) != want {
            return Err(Error::Integrity(format!("{name} does not match its manifest digest")));
        }
    }
    let index = InvertedIndex::from_text(&index_text)?;
    let store = EmbeddingStore::parse(&store_text, Some(manifest.dim))?;
    if index.doc_count() != manifest.articles {
        return Err(Error::Integrity(format!(
            "manifest lists {} articles, index has {}",
            manifest.articles,
            index.doc_count()
        )));
    }
    Ok((index, store, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::dense::HashingEmbedder;
    use crate::lexical::LexicalScorer;
    use crate::segment::Segmenter;

    const CORPUS: &str = r#"{"type":"document","id":"d","title":"Quy chế"}
{"type":"article","id":"a1","doc_id":"d","title":"Điều 1","text":"Năm học gồm hai học kỳ chính"}
{"type":"article","id":"a2","doc_id":"d","title":"Điều 2","text":"Học phí đóng theo học kỳ"}
"#;

    fn build(dir: &Path) -> (InvertedIndex, EmbeddingStore) {
        let seg = Segmenter::whitespace();
        let corpus = Corpus::parse(CORPUS, &seg).unwrap();
        let index = InvertedIndex::build(&corpus, &seg).unwrap();
        let store = EmbeddingStore::from_embedder(&corpus, &HashingEmbedder::new(16, seg).unwrap()).unwrap();
        write_artifacts(dir, CORPUS.as_bytes(), &index, &store).unwrap();
        (index, store)
    }

    #[test]
    fn reload_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (index, store) = build(dir.path());
        let (index2, store2, manifest) = read_artifacts(dir.path(), Some(CORPUS.as_bytes())).unwrap();
        assert_eq!(manifest.articles, 2);
        let q = ["học", "kỳ"];
        for s in [LexicalScorer::TfIdf, LexicalScorer::default()] {
            let a: Vec<u64> = index.score_all(&q, s).iter().map(|x| x.to_bits()).collect();
            let b: Vec<u64> = index2.score_all(&q, s).iter().map(|x| x.to_bits()).collect();
            assert_eq!(a, b);
        }
        for id in store.ids() {
            assert_eq!(store.vector(id), store2.vector(id));
        }
    }

    #[test]
    fn detects_tampering_and_stale_corpus() {
        let dir = tempfile::tempdir().unwrap();
        build(dir.path());
        assert!(matches!(
            read_artifacts(dir.path(), Some(b"other corpus")),
            Err(Error::Integrity(_))
        ));
        let path = dir.path().join(EMBEDDINGS_FILE);
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replacen('1', "2", 1)).unwrap();
        assert!(matches!(read_artifacts(dir.path(), None), Err(Error::Integrity(_))));
        std::fs::remove_file(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(matches!(read_artifacts(dir.path(), None), Err(Error::Io { .. })));
    }
}
