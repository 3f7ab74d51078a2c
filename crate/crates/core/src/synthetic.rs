//! Seeded synthetic corpora with QA pairs whose answers are token-aligned
//! spans, and an all-oracle pipeline over them. Used for end-to-end tests
//! and demos without model endpoints.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, CorpusRecord, QaPair};
use crate::dense::{EmbeddingStore, HashingEmbedder, QueryEmbedder};
use crate::error::{Error, Result, TransportError};
use crate::fusion::{FusionConfig, HybridRetriever};
use crate::generator::EchoExtractiveGenerator;
use crate::lexical::InvertedIndex;
use crate::pipeline::{Pipeline, PipelineSettings};
use crate::reader::GoldLabeler;
use crate::segment::Segmenter;

const SYLLABLES: &[&str] = &[
    "học", "sinh", "viên", "kỳ", "thi", "điểm", "trường", "quy", "định", "đào", "tạo", "tín",
    "chỉ", "môn", "lớp", "năm", "ngày", "phí", "hồ", "sơ", "xét", "tốt", "nghiệp", "đăng", "ký",
    "khoa", "giảng", "dạy", "chương", "trình", "kết", "quả", "rèn", "luyện", "thời", "gian",
    "hạn", "nộp", "được", "phải", "không", "theo", "của", "và", "các",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticParams {
    pub documents: usize,
    pub articles: usize,
    /// At most one pair per article.
    pub qa_pairs: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Article-unique marker tokens per article; spans start at a marker.
    pub markers: usize,
    pub max_spans: usize,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            documents: 3,
            articles: 30,
            qa_pairs: 20,
            min_tokens: 40,
            max_tokens: 80,
            markers: 4,
            max_spans: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub records: Vec<CorpusRecord>,
    pub corpus: Corpus,
    pub qa: Vec<QaPair>,
}

impl SyntheticParams {
    fn check(&self) -> Result<()> {
        let ok = self.documents >= 1
            && self.articles >= self.documents
            && self.qa_pairs <= self.articles
            && self.max_spans >= 1
            && self.markers >= self.max_spans + 1
            && self.min_tokens >= 6 * self.markers
            && self.max_tokens >= self.min_tokens;
        if !ok {
            return Err(Error::invalid(format!("inconsistent synthetic parameters {self:?}")));
        }
        Ok(())
    }

    /// Panics on an inconsistent parameters; see [`SyntheticParams::try_generate`].
    pub fn generate(&self, seed: u64) -> SyntheticData {
        self.try_generate(seed).expect("valid synthetic parameters")
    }

    pub fn try_generate(&self, seed: u64) -> Result<SyntheticData> {
        self.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut records: Vec<CorpusRecord> = (0..self.documents)
            .map(|d| CorpusRecord::Document {
                id: format!("doc{d}"),
                title: format!("Quy chế số {}", d + 1),
            })
            .collect();
        // (tokens, marker positions) per article
        let mut bodies = Vec::with_capacity(self.articles);
        for a in 0..self.articles {
            let len = rng.gen_range(self.min_tokens..=self.max_tokens);
            let mut tokens: Vec<String> = (0..len)
                .map(|_| SYLLABLES.choose(&mut rng).expect("non-empty").to_string())
                .collect();
            // One marker per equal slot, never in the last 4 tokens of a slot.
            let slot = len / self.markers;
            let positions: Vec<usize> = (0..self.markers)
                .map(|m| m * slot + rng.gen_range(0..slot - 4))
                .collect();
            for (m, &p) in positions.iter().enumerate() {
                tokens[p] = format!("mã{a}k{m}");
            }
            records.push(CorpusRecord::Article {
                id: format!("a{a}"),
                doc_id: format!("doc{}", a % self.documents),
                title: format!("Điều {}", a + 1),
                text: tokens.join(" "),
            });
            bodies.push((tokens, positions));
        }

        let mut chosen: Vec<usize> = (0..self.articles).collect();
        chosen.shuffle(&mut rng);
        chosen.truncate(self.qa_pairs);
        let mut qa = Vec::with_capacity(self.qa_pairs);
        for (q, &a) in chosen.iter().enumerate() {
            let (tokens, positions) = &bodies[a];
            let n_spans = rng.gen_range(1..=self.max_spans);
            let mut picks: Vec<usize> = (0..positions.len()).collect();
            picks.shuffle(&mut rng);
            let mut picks: Vec<usize> = picks[..n_spans].to_vec();
            picks.sort_unstable();
            let spans: Vec<String> = picks
                .iter()
                .map(|&m| {
                    let start = positions[m];
                    let len = rng.gen_range(2..=4);
                    tokens[start..start + len].join(" ")
                })
                .collect();
            let mut cue: Vec<String> = picks.iter().map(|&m| tokens[positions[m]].clone()).collect();
            for _ in 0..3 {
                cue.push(SYLLABLES.choose(&mut rng).expect("non-empty").to_string());
            }
            let answer = spans.join("#");
            qa.push(QaPair {
                qa_id: format!("q{q}"),
                question: format!("Theo quy định {} là gì?", cue.join(" ")),
                article_id: format!("a{a}"),
                extractive_answer: answer.clone(),
                abstractive_answer: answer,
            });
        }
        let corpus = Corpus::from_records(records.clone(), &Segmenter::whitespace())?;
        Ok(SyntheticData { records, corpus, qa })
    }
}

/// Hashing embedder that maps each known question to its gold article's
/// vector.
pub struct OracleEmbedder {
    inner: HashingEmbedder,
    by_question: HashMap<String, Vec<f64>>,
}

impl OracleEmbedder {
    pub fn new(inner: HashingEmbedder, corpus: &Corpus, pairs: &[QaPair]) -> Self {
        let by_question = pairs
            .iter()
            .filter_map(|p| {
                let article = corpus.article(&p.article_id)?;
                let v = inner.embed(&article.text).ok()?;
                Some((p.question.clone(), v))
            })
            .collect();
        OracleEmbedder { inner, by_question }
    }
}

impl QueryEmbedder for OracleEmbedder {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn embed(&self, text: &str) -> std::result::Result<Vec<f64>, TransportError> {
        match self.by_question.get(text) {
            Some(v) => Ok(v.clone()),
            None => self.inner.embed(text),
        }
    }
}

/// Pipeline with oracle stages throughout: [`OracleEmbedder`], the gold
/// labeler and the echo generator, using default fusion with `top_k`.
pub fn oracle_pipeline(data: &SyntheticData, top_k: usize) -> Result<Pipeline> {
    let seg = Segmenter::whitespace();
    let hashing = HashingEmbedder::new(64, seg.clone())?;
    let index = InvertedIndex::build(&data.corpus, &seg)?;
    let store = EmbeddingStore::from_embedder(&data.corpus, &hashing)?;
    let embedder = OracleEmbedder::new(hashing, &data.corpus, &data.qa);
    let retriever = HybridRetriever::new(index, store)?;
    let labeler = GoldLabeler::new(&data.corpus, &data.qa, &seg);
    let settings = PipelineSettings {
        fusion: FusionConfig {
            top_k,
            ..FusionConfig::default()
        },
        ..PipelineSettings::default()
    };
    Pipeline::new(
        data.corpus.clone(),
        seg,
        retriever,
        Box::new(embedder),
        Box::new(labeler),
        Some(Box::new(EchoExtractiveGenerator)),
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_qa;

    #[test]
    fn deterministic_and_valid() {
        let spec = SyntheticParams::default();
        let a = spec.generate(5);
        let b = spec.generate(5);
        assert_eq!(a.qa, b.qa);
        assert_eq!(a.corpus.to_jsonl(), b.corpus.to_jsonl());
        assert_ne!(spec.generate(6).qa, a.qa);
        assert_eq!(a.corpus.articles().len(), 30);
        assert_eq!(a.qa.len(), 20);
        validate_qa(&a.qa, &a.corpus).unwrap();
    }

    #[test]
    fn spans_are_unique_and_ordered() {
        let data = SyntheticParams::default().generate(9);
        for p in &data.qa {
            let text = &data.corpus.article(&p.article_id).unwrap().text;
            let mut last = 0;
            for s in p.spans() {
                assert_eq!(text.matches(s).count(), 1, "{s}");
                let at = text.find(s).unwrap();
                assert!(at >= last);
                last = at + s.len();
            }
        }
    }

    #[test]
    fn rejects_bad_spec() {
        let bad = SyntheticParams {
            qa_pairs: 31,
            ..Default::default()
        };
        assert!(bad.try_generate(0).is_err());
    }
}
