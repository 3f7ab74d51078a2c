mod common;

use std::sync::Arc;
use std::time::Duration;

use regqa::clients::HttpGenerator;
use regqa::server::router;
use regqa_core::dense::{EmbeddingStore, HashingEmbedder};
use regqa_core::fusion::HybridRetriever;
use regqa_core::generator::GeneratorClient;
use regqa_core::lexical::InvertedIndex;
use regqa_core::pipeline::{Pipeline, PipelineSettings};
use regqa_core::reader::{GoldLabeler, Labeler, OutsideLabeler};
use regqa_core::segment::Segmenter;
use regqa_core::synthetic::{oracle_pipeline, OracleEmbedder, SyntheticData, SyntheticParams};
use serde_json::json;

fn data() -> SyntheticData {
    SyntheticParams::default().generate(21)
}

fn custom(
    data: &SyntheticData,
    labeler: Box<dyn Labeler>,
    generator: Option<Box<dyn GeneratorClient>>,
) -> Pipeline {
    let seg = Segmenter::whitespace();
    let hashing = HashingEmbedder::new(64, seg.clone()).unwrap();
    let index = InvertedIndex::build(&data.corpus, &seg).unwrap();
    let store = EmbeddingStore::from_embedder(&data.corpus, &hashing).unwrap();
    let embedder = OracleEmbedder::new(hashing, &data.corpus, &data.qa);
    Pipeline::new(
        data.corpus.clone(),
        seg,
        HybridRetriever::new(index, store).unwrap(),
        Box::new(embedder),
        labeler,
        generator,
        PipelineSettings::default(),
    )
    .unwrap()
}

#[test]
fn ask_returns_cited_answer() {
    let data = data();
    let base = common::spawn(router(Arc::new(oracle_pipeline(&data, 5).unwrap())));
    let pair = &data.qa[0];
    let r = common::post(
        &format!("{base}/ask"),
        &json!({ "question": pair.question, "top_k": 3, "alpha": 0.3, "fusion": "weight" }).to_string(),
    );
    assert_eq!(r.status, 200);
    let b = &r.body;
    assert_eq!(b["status"], "ok");
    assert_eq!(b["no_answer"], false);
    assert_eq!(b["extractive"], pair.extractive_answer.as_str());
    assert_eq!(b["abstractive"], pair.abstractive_answer.as_str());
    assert_eq!(b["article_id"], pair.article_id.as_str());
    let doc = data.corpus.document_of(&pair.article_id).unwrap();
    assert_eq!(b["document_title"], doc.title.as_str());
    assert_eq!(b["retrieved"].as_array().unwrap().len(), 3);
    assert_eq!(b["generator_source"], "remote");
    for key in ["retrieval", "retrieval_normalized", "reader", "final"] {
        assert!(b["scores"][key].is_number(), "{key}");
    }
    // Every span is verifiable against the cited article.
    let text: Vec<char> = data.corpus.article(&pair.article_id).unwrap().text.chars().collect();
    for span in b["spans"].as_array().unwrap() {
        let (s, e) = (span["char_start"].as_u64().unwrap() as usize, span["char_end"].as_u64().unwrap() as usize);
        let surface: String = text[s..e].iter().collect();
        assert!(pair.extractive_answer.split('#').any(|g| g == surface));
    }
}

#[test]
fn rejects_bad_requests() {
    let base = common::spawn(router(Arc::new(oracle_pipeline(&data(), 5).unwrap())));
    let url = format!("{base}/ask");
    for body in [
        "not json",
        r#"{"top_k": 3}"#,
        r#"{"question": "   "}"#,
        r#"{"question": "q", "top_k": 0}"#,
        r#"{"question": "q", "alpha": 1.5}"#,
        r#"{"question": "q", "fusion": "average"}"#,
        r#"{"question": "q", "k": 3}"#,
    ] {
        let r = common::post(&url, body);
        assert_eq!(r.status, 400, "{body}");
        assert!(r.body["error"].as_str().is_some_and(|e| !e.is_empty()), "{body}");
    }
    assert_eq!(common::post(&format!("{base}/retrieve"), r#"{"question":""}"#).status, 400);
}

#[test]
fn retrieve_and_health() {
    let data = data();
    let base = common::spawn(router(Arc::new(oracle_pipeline(&data, 5).unwrap())));
    let pair = &data.qa[1];
    let r = common::post(
        &format!("{base}/retrieve"),
        &json!({ "question": pair.question, "top_k": 4 }).to_string(),
    );
    assert_eq!(r.status, 200);
    let ctx = r.body["contexts"].as_array().unwrap();
    assert_eq!(ctx.len(), 4);
    assert_eq!(ctx[0]["article_id"], pair.article_id.as_str());
    assert!(ctx[0]["article_title"].as_str().unwrap().starts_with("Điều"));
    assert!(ctx.windows(2).all(|w| w[0]["fused"].as_f64() >= w[1]["fused"].as_f64()));

    let h = common::get(&format!("{base}/health"));
    assert_eq!(h.status, 200);
    assert_eq!(h.body["status"], "ok");
    assert_eq!(h.body["articles"], 30);
    assert_eq!(h.body["documents"], 3);
    assert_eq!(h.body["top_k"], 5);
    assert_eq!(h.body["fusion"], "weight");
}

#[test]
fn generator_down_falls_back_with_every_span() {
    let data = data();
    let gen = HttpGenerator::new(&common::dead_endpoint(), Duration::from_secs(2));
    let labeler = GoldLabeler::new(&data.corpus, &data.qa, &Segmenter::whitespace());
    let base = common::spawn(router(Arc::new(custom(&data, Box::new(labeler), Some(Box::new(gen))))));
    for pair in &data.qa[..5] {
        let r = common::post(&format!("{base}/ask"), &json!({ "question": pair.question }).to_string());
        assert_eq!(r.status, 200);
        assert_eq!(r.body["status"], "degraded");
        assert_eq!(r.body["generator_source"], "fallback");
        let text = r.body["abstractive"].as_str().unwrap();
        for span in pair.spans() {
            assert!(text.contains(span), "{span} not in {text}");
        }
        assert!(r.body["degraded"][0].as_str().unwrap().starts_with("generator:"));
    }
}

#[test]
fn all_outside_labeler_is_no_answer() {
    let data = data();
    let base = common::spawn(router(Arc::new(custom(&data, Box::new(OutsideLabeler), None))));
    let r = common::post(&format!("{base}/ask"), &json!({ "question": data.qa[0].question }).to_string());
    assert_eq!(r.status, 200);
    assert_eq!(r.body["no_answer"], true);
    assert_eq!(r.body["status"], "no_answer");
    assert!(r.body["abstractive"].is_null());
    assert!(!r.body["retrieved"].as_array().unwrap().is_empty());
}

#[test]
fn concurrent_requests_agree() {
    let data = data();
    let base = common::spawn(router(Arc::new(oracle_pipeline(&data, 5).unwrap())));
    let url = format!("{base}/ask");
    let answers: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let q = data.qa[i % 4].question.clone();
                let url = url.clone();
                s.spawn(move || common::post(&url, &json!({ "question": q }).to_string()).body)
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for i in 0..4 {
        assert_eq!(answers[i], answers[i + 4]);
    }
}
