//! Lexical + dense score fusion and the top-k context query.
//!
//! Lexical scores enter fusion raw; dense cosine scores are min-max
//! normalised over every indexed article before fusing and truncating.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dense::{min_max_normalize, EmbeddingStore, QueryEmbedder};
use crate::error::{Error, Result};
use crate::lexical::{InvertedIndex, LexicalScorer};
use crate::rank::top_positions;
use crate::segment::Segmenter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// `alpha * lexical + (1 - alpha) * dense`
    #[default]
    Weight,
    /// `lexical * dense`
    Multiplication,
    #[serde(rename = "lexical")]
    LexicalOnly,
    #[serde(rename = "dense")]
    DenseOnly,
}

impl FusionMode {
    pub fn needs_dense(self) -> bool {
        self != FusionMode::LexicalOnly
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weight" => Ok(FusionMode::Weight),
            "multiplication" => Ok(FusionMode::Multiplication),
            "lexical" => Ok(FusionMode::LexicalOnly),
            "dense" => Ok(FusionMode::DenseOnly),
            other => Err(Error::invalid(format!("unknown fusion mode `{other}`"))),
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Weight => "weight",
            FusionMode::Multiplication => "multiplication",
            FusionMode::LexicalOnly => "lexical",
            FusionMode::DenseOnly => "dense",
        })
    }
}

/// Top-k values evaluated by default.
pub const TOP_K_GRID: [usize; 7] = [1, 5, 10, 15, 20, 25, 30];

/// Best weights found for each lexical scorer by grid search.
pub const TUNED_ALPHA_BM25: f64 = 0.1;
pub const TUNED_ALPHA_TFIDF: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub mode: FusionMode,
    pub alpha: f64,
    pub lexical: LexicalScorer,
    pub top_k: usize,
    /// Min-max normalise lexical scores too before fusing.
    pub normalize_lexical: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            mode: FusionMode::Weight,
            alpha: TUNED_ALPHA_BM25,
            lexical: LexicalScorer::default(),
            top_k: 10,
            normalize_lexical: false,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if self.top_k == 0 {
            return Err(Error::invalid("top_k must be at least 1"));
        }
        Ok(())
    }
}

pub fn fuse_scores(lexical: f64, dense_norm: f64, cfg: &FusionConfig) -> f64 {
    match cfg.mode {
        FusionMode::Weight => lexical * cfg.alpha + (1.0 - cfg.alpha) * dense_norm,
        FusionMode::Multiplication => lexical * dense_norm,
        FusionMode::LexicalOnly => lexical,
        FusionMode::DenseOnly => dense_norm,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedContext {
    pub article_id: String,
    pub fused: f64,
    pub lexical: f64,
    /// Normalised dense score; absent when the mode did not consult the embedder.
    pub dense: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub ranked: Vec<RetrievedContext>,
}

impl RetrievalResult {
    pub fn ids(&self) -> Vec<String> {
        self.ranked.iter().map(|r| r.article_id.clone()).collect()
    }
}

/// Per-article score lists for one question, aligned with index order.
#[derive(Debug, Clone)]
pub struct ScoreComponents {
    pub lexical: Vec<f64>,
    pub dense: Option<Vec<f64>>,
}

impl ScoreComponents {
    /// Fuses and ranks. Lexical normalisation happens here when configured.
    pub fn rank(&self, ids: &[String], cfg: &FusionConfig) -> Result<RetrievalResult> {
        cfg.validate()?;
        if cfg.mode.needs_dense() && self.dense.is_none() {
            return Err(Error::invalid("dense scores required for this fusion mode"));
        }
        let lexical_in = if cfg.normalize_lexical {
            min_max_normalize(&self.lexical)?
        } else {
            self.lexical.clone()
        };
        let fused: Vec<f64> = lexical_in
            .iter()
            .enumerate()
            .map(|(i, &lex)| {
                let dense = self.dense.as_ref().map_or(0.0, |d| d[i]);
                fuse_scores(lex, dense, cfg)
            })
            .collect();
        let ranked = top_positions(ids, &fused, cfg.top_k)
            .into_iter()
            .map(|p| RetrievedContext {
                article_id: ids[p].clone(),
                fused: fused[p],
                lexical: self.lexical[p],
                dense: self.dense.as_ref().map(|d| d[p]),
            })
            .collect();
        Ok(RetrievalResult { ranked })
    }
}

/// Index and embedding store over the same articles.
#[derive(Debug, Clone)]
pub struct HybridRetriever {
    index: InvertedIndex,
    store: EmbeddingStore,
}

impl HybridRetriever {
    /// Fails when any indexed article lacks a vector.
    pub fn new(index: InvertedIndex, store: EmbeddingStore) -> Result<Self> {
        let missing = store.missing(index.article_ids());
        if !missing.is_empty() {
            return Err(Error::MissingEmbeddings(missing));
        }
        Ok(HybridRetriever { index, store })
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn store(&self) -> &EmbeddingStore {
        &self.store
    }

    pub fn components(
        &self,
        question: &str,
        embedder: &dyn QueryEmbedder,
        seg: &Segmenter,
        lexical: LexicalScorer,
        with_dense: bool,
    ) -> Result<ScoreComponents> {
        let tokens = seg.segment(question);
        let lexical = self.index.score_all(&tokens, lexical);
        let dense = if with_dense {
            if embedder.dim() != self.store.dim() {
                return Err(Error::Dimension {
                    id: "<embedder>".into(),
                    expected: self.store.dim(),
                    actual: embedder.dim(),
                });
            }
            let q = embedder.embed(question)?;
            self.store.check_query(&q)?;
            let cosines = self
                .index
                .article_ids()
                .iter()
                .map(|id| {
                    let v = self.store.vector(id).expect("coverage checked at construction");
                    crate::dense::cosine_similarity(&q, v)
                })
                .collect::<Result<Vec<_>>>()?;
            Some(min_max_normalize(&cosines)?)
        } else {
            None
        };
        Ok(ScoreComponents { lexical, dense })
    }

    pub fn query_context(
        &self,
        question: &str,
        embedder: &dyn QueryEmbedder,
        seg: &Segmenter,
        cfg: &FusionConfig,
    ) -> Result<RetrievalResult> {
        cfg.validate()?;
        let parts = self.components(question, embedder, seg, cfg.lexical, cfg.mode.needs_dense())?;
        parts.rank(self.index.article_ids(), cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::TransportError;
    use crate::lexical::Bm25Params;
    use proptest::prelude::*;

    struct Fixed(Vec<f64>);

    impl QueryEmbedder for Fixed {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn embed(&self, _: &str) -> Result<Vec<f64>, TransportError> {
            Ok(self.0.clone())
        }
    }

    fn cfg(mode: FusionMode, alpha: f64) -> FusionConfig {
        FusionConfig {
            mode,
            alpha,
            top_k: 10,
            ..FusionConfig::default()
        }
    }

    #[test]
    fn fuse_examples() {
        let w = cfg(FusionMode::Weight, 0.1);
        assert!((fuse_scores(0.8, 0.5, &w) - 0.53).abs() < 1e-12);
        assert_eq!(fuse_scores(0.8123, 0.5, &cfg(FusionMode::Weight, 1.0)), 0.8123);
        assert!((fuse_scores(0.8, 0.5, &cfg(FusionMode::Multiplication, 0.1)) - 0.40).abs() < 1e-12);
        assert_eq!(fuse_scores(0.8, 0.5, &cfg(FusionMode::LexicalOnly, 0.1)), 0.8);
        assert_eq!(fuse_scores(0.8, 0.5, &cfg(FusionMode::DenseOnly, 0.1)), 0.5);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(FusionMode::Weight, 1.1).validate().is_err());
        let mut c = FusionConfig::default();
        c.top_k = 0;
        assert!(c.validate().is_err());
        assert_eq!("multiplication".parse::<FusionMode>().unwrap(), FusionMode::Multiplication);
        assert!("rrf".parse::<FusionMode>().is_err());
    }

    fn retriever() -> HybridRetriever {
        let docs = [
            ("a1", "học kỳ chính học kỳ hè"),
            ("a2", "học phí tín chỉ"),
            ("a3", "điểm rèn luyện học kỳ"),
        ];
        let index = InvertedIndex::from_tokenized(
            docs.iter()
                .map(|(id, t)| (id.to_string(), t.split_whitespace().collect::<Vec<_>>())),
        )
        .unwrap();
        let mut store = EmbeddingStore::new(2).unwrap();
        store.insert("a1", vec![1.0, 0.0]).unwrap();
        store.insert("a2", vec![0.0, 1.0]).unwrap();
        store.insert("a3", vec![1.0, 1.0]).unwrap();
        HybridRetriever::new(index, store).unwrap()
    }

    #[test]
    fn coverage_checked() {
        let index = InvertedIndex::from_tokenized([("x".to_string(), vec!["a"]), ("y".to_string(), vec!["b"])]).unwrap();
        let mut store = EmbeddingStore::new(1).unwrap();
        store.insert("x", vec![1.0]).unwrap();
        match HybridRetriever::new(index, store).unwrap_err() {
            Error::MissingEmbeddings(ids) => assert_eq!(ids, ["y"]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn boundary_reductions() {
        let r = retriever();
        let seg = Segmenter::whitespace();
        let emb = Fixed(vec![0.2, 1.0]);
        let q = "học kỳ hè";
        let lex = r.index().rank(&seg.segment(q), LexicalScorer::default(), 10).unwrap();
        let dense = r.store().rank(q, &emb, 10).unwrap();
        let at_one = r.query_context(q, &emb, &seg, &cfg(FusionMode::Weight, 1.0)).unwrap();
        let at_zero = r.query_context(q, &emb, &seg, &cfg(FusionMode::Weight, 0.0)).unwrap();
        let ids = |v: &[(String, f64)]| v.iter().map(|x| x.0.clone()).collect::<Vec<_>>();
        assert_eq!(at_one.ids(), ids(&lex));
        assert_eq!(at_zero.ids(), ids(&dense));
        assert_ne!(at_one.ids(), at_zero.ids());
    }

    #[test]
    fn lexical_only_skips_embedder() {
        struct Down;
        impl QueryEmbedder for Down {
            fn dim(&self) -> usize {
                2
            }
            fn embed(&self, _: &str) -> Result<Vec<f64>, TransportError> {
                Err(TransportError::Timeout)
            }
        }
        let r = retriever();
        let seg = Segmenter::whitespace();
        let res = r.query_context("học phí", &Down, &seg, &cfg(FusionMode::LexicalOnly, 0.5)).unwrap();
        assert_eq!(res.ranked[0].article_id, "a2");
        assert_eq!(res.ranked[0].dense, None);
        assert!(matches!(
            r.query_context("học phí", &Down, &seg, &cfg(FusionMode::Weight, 0.5)),
            Err(Error::Transport(TransportError::Timeout))
        ));
    }

    #[test]
    fn normalized_lexical_flag() {
        let r = retriever();
        let seg = Segmenter::whitespace();
        let mut c = cfg(FusionMode::LexicalOnly, 0.5);
        c.normalize_lexical = true;
        let res = r.query_context("học kỳ", &Fixed(vec![1.0, 0.0]), &seg, &c).unwrap();
        assert_eq!(res.ranked[0].fused, 1.0);
        // the raw lexical score is still reported
        assert!(res.ranked[0].lexical > 0.0 && res.ranked[0].lexical != 1.0);
        let last = res.ranked.last().unwrap();
        assert_eq!(last.fused, 0.0);
    }

    #[test]
    fn tfidf_scorer_selectable() {
        let r = retriever();
        let seg = Segmenter::whitespace();
        let mut c = cfg(FusionMode::LexicalOnly, 0.3);
        c.lexical = LexicalScorer::TfIdf;
        let res = r.query_context("tín chỉ", &Fixed(vec![1.0, 0.0]), &seg, &c).unwrap();
        assert_eq!(res.ranked[0].article_id, "a2");
        c.lexical = LexicalScorer::Bm25(Bm25Params::new(2.0, 0.5).unwrap());
        assert!(r.query_context("tín chỉ", &Fixed(vec![1.0, 0.0]), &seg, &c).is_ok());
    }

    proptest! {
        #[test]
        fn weight_monotone_in_alpha(lex in 0.0f64..20.0, dense in 0.0f64..=1.0, a1 in 0.0f64..=1.0, a2 in 0.0f64..=1.0) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let f_lo = fuse_scores(lex, dense, &cfg(FusionMode::Weight, lo));
            let f_hi = fuse_scores(lex, dense, &cfg(FusionMode::Weight, hi));
            if lex >= dense {
                prop_assert!(f_hi >= f_lo - 1e-12);
            } else {
                prop_assert!(f_hi <= f_lo + 1e-12);
            }
        }

        #[test]
        fn prefix_across_top_k(lex in proptest::collection::vec(0.0f64..5.0, 1..25), seed_dense in proptest::collection::vec(0.0f64..=1.0, 25), k in 1usize..25, extra in 0usize..10) {
            let ids: Vec<String> = (0..lex.len()).map(|i| format!("a{i:02}")).collect();
            let parts = ScoreComponents { dense: Some(seed_dense[..lex.len()].to_vec()), lexical: lex };
            let short = parts.rank(&ids, &FusionConfig { top_k: k, ..FusionConfig::default() }).unwrap();
            let long = parts.rank(&ids, &FusionConfig { top_k: k + extra, ..FusionConfig::default() }).unwrap();
            prop_assert_eq!(short.ranked.len(), k.min(ids.len()));
            prop_assert_eq!(&long.ranked[..short.ranked.len()], &short.ranked[..]);
        }
    }
}
