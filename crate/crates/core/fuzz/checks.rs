// Shared by the fuzz targets and the seed replay test in `tests/fuzz_seeds.rs`.
// Each check must not panic on any input; parsed values must round-trip.
#![allow(dead_code)]

use regqa_core::config::{PipelineConfig, RawConfig};
use regqa_core::corpus::{parse_qa_dataset, qa_to_jsonl, Corpus};
use regqa_core::dense::{EmbeddingStore, FileLookupEmbedder};
use regqa_core::lexical::{InvertedIndex, LexicalScorer};
use regqa_core::reader::bio::decode_token_spans;
use regqa_core::reader::LabelProbs;
use regqa_core::segment::{reconstruct, Segmenter};
use regqa_core::wire::{parse_embed_response, parse_generate_response, parse_label_response, AskRequest};

pub const TARGETS: &[(&str, fn(&[u8]))] = &[
    ("corpus_jsonl", corpus_jsonl),
    ("qa_jsonl", qa_jsonl),
    ("embeddings_jsonl", embeddings_jsonl),
    ("query_vectors", query_vectors),
    ("index_text", index_text),
    ("config", config),
    ("label_response", label_response),
    ("embed_response", embed_response),
    ("generate_response", generate_response),
    ("ask_request", ask_request),
    ("decode_bio", decode_bio),
    ("segment", segment),
];

fn text(data: &[u8]) -> Option<&str> {
    std::str::from_utf8(data).ok()
}

pub fn corpus_jsonl(data: &[u8]) {
    let Some(s) = text(data) else { return };
    let seg = Segmenter::whitespace();
    if let Ok(corpus) = Corpus::parse(s, &seg) {
        let again = Corpus::parse(&corpus.to_jsonl(), &seg).expect("serialized corpus reparses");
        assert_eq!(again.to_jsonl(), corpus.to_jsonl());
    }
}

const QA_CORPUS: &str = r#"{"type":"document","id":"d","title":"Quy chế"}
{"type":"article","id":"a1","doc_id":"d","title":"Điều 1","text":"Năm học gồm hai học kỳ chính và một học kỳ hè"}
"#;

pub fn qa_jsonl(data: &[u8]) {
    let Some(s) = text(data) else { return };
    let corpus = Corpus::parse(QA_CORPUS, &Segmenter::whitespace()).unwrap();
    if let Ok(pairs) = parse_qa_dataset(s, &corpus) {
        let again = parse_qa_dataset(&qa_to_jsonl(&pairs), &corpus).expect("serialized QA reparses");
        assert_eq!(again, pairs);
    }
}

pub fn embeddings_jsonl(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(store) = EmbeddingStore::parse(s, None) {
        let again = EmbeddingStore::parse(&store.to_jsonl(), Some(store.dim())).expect("store reparses");
        for id in store.ids() {
            assert_eq!(store.vector(id), again.vector(id));
        }
    }
}

pub fn query_vectors(data: &[u8]) {
    if let Some(s) = text(data) {
        let _ = FileLookupEmbedder::parse(s);
    }
}

pub fn index_text(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(index) = InvertedIndex::from_text(s) {
        let again = InvertedIndex::from_text(&index.to_text()).expect("index reparses");
        assert_eq!(again.to_text(), index.to_text());
        let q = ["học", "kỳ"];
        for scorer in [LexicalScorer::TfIdf, LexicalScorer::default()] {
            let a = index.score_all(&q, scorer);
            let b = again.score_all(&q, scorer);
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}

pub fn config(data: &[u8]) {
    let Some(s) = text(data) else { return };
    if let Ok(raw) = RawConfig::parse(s) {
        let _ = PipelineConfig::from_raw(&raw, std::path::Path::new("/base"));
    }
}

pub fn label_response(data: &[u8]) {
    let Some((&rows, body)) = data.split_first() else { return };
    if let Ok(probs) = parse_label_response(body, usize::from(rows)) {
        assert_eq!(probs.len(), usize::from(rows));
    }
}

pub fn embed_response(data: &[u8]) {
    let Some((&dim, body)) = data.split_first() else { return };
    if let Ok(v) = parse_embed_response(body, usize::from(dim)) {
        assert!(v.len() == usize::from(dim) && v.iter().all(|x| x.is_finite()));
    }
}

pub fn generate_response(data: &[u8]) {
    let _ = parse_generate_response(data);
}

pub fn ask_request(data: &[u8]) {
    if let Ok(req) = serde_json::from_slice::<AskRequest>(data) {
        let again: AskRequest = serde_json::from_str(&serde_json::to_string(&req).unwrap()).unwrap();
        assert_eq!(again.question, req.question);
        assert_eq!(again.top_k, req.top_k);
        assert_eq!(again.fusion, req.fusion);
    }
}

/// Three bytes per token, scaled to a distribution.
pub fn decode_bio(data: &[u8]) {
    let probs: Vec<LabelProbs> = data
        .chunks_exact(3)
        .map(|c| {
            let raw = [f64::from(c[0]), f64::from(c[1]), f64::from(c[2]) + 1.0];
            let sum: f64 = raw.iter().sum();
            [raw[0] / sum, raw[1] / sum, raw[2] / sum]
        })
        .collect();
    let spans = decode_token_spans(&probs);
    let mut next = 0;
    for s in &spans {
        assert!(s.first >= next && s.first <= s.last && s.last < probs.len());
        assert!((0.0..=1.0).contains(&s.score));
        next = s.last + 1;
    }
}

pub fn segment(data: &[u8]) {
    let Some(s) = text(data) else { return };
    let dict = Segmenter::with_dictionary(["học kỳ", "sinh viên", "học phí"]);
    for seg in [Segmenter::whitespace(), dict] {
        let tokens = seg.segment(s);
        assert_eq!(reconstruct(s, &tokens), s);
        for t in &tokens {
            assert!(t.char_start < t.char_end);
        }
        for w in tokens.windows(2) {
            assert!(w[0].char_end <= w[1].char_start);
        }
    }
}
