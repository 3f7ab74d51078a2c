use std::path::Path;
use std::process::Command;

use regqa::assemble::{build_index, load_pipeline};
use regqa_core::config::PipelineConfig;
use regqa_core::corpus::qa_to_jsonl;
use regqa_core::lexical::LexicalScorer;
use regqa_core::pipeline::QueryOverrides;
use regqa_core::synthetic::SyntheticParams;
use regqa_core::Error;

fn write_workspace(dir: &Path, extra: &str) -> PipelineConfig {
    let data = SyntheticParams::default().generate(4);
    std::fs::write(dir.join("corpus.jsonl"), data.corpus.to_jsonl()).unwrap();
    std::fs::write(dir.join("qa.jsonl"), qa_to_jsonl(&data.qa)).unwrap();
    let conf = format!(
        "[corpus]\npath = corpus.jsonl\nqa = qa.jsonl\n[index]\ndir = idx\n[embedder]\ndim = 32\n[retrieval]\ntop_k = 5\n{extra}"
    );
    std::fs::write(dir.join("regqa.conf"), conf).unwrap();
    PipelineConfig::load(dir.join("regqa.conf")).unwrap()
}

#[test]
fn persisted_index_scores_match_in_memory_build() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_workspace(dir.path(), "");
    let fresh = load_pipeline(&cfg).unwrap();
    assert!(fresh.manifest.is_none());

    let m1 = build_index(&cfg).unwrap();
    let m2 = build_index(&cfg).unwrap();
    assert_eq!(m1, m2);
    let loaded = load_pipeline(&cfg).unwrap();
    assert_eq!(loaded.manifest.as_ref(), Some(&m1));

    let a = fresh.pipeline.retriever().index();
    let b = loaded.pipeline.retriever().index();
    for article in fresh.pipeline.corpus().articles().iter().take(10) {
        let q: Vec<&str> = article.tokens.iter().take(6).map(|t| t.surface.as_str()).collect();
        for s in [LexicalScorer::TfIdf, LexicalScorer::default()] {
            let x: Vec<u64> = a.score_all(&q, s).iter().map(|v| v.to_bits()).collect();
            let y: Vec<u64> = b.score_all(&q, s).iter().map(|v| v.to_bits()).collect();
            assert_eq!(x, y);
        }
    }
    let q = &fresh.pipeline.corpus().articles()[0].text;
    assert_eq!(
        fresh.pipeline.answer_question(q, &QueryOverrides::default()).unwrap(),
        loaded.pipeline.answer_question(q, &QueryOverrides::default()).unwrap()
    );
}

#[test]
fn stale_index_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_workspace(dir.path(), "");
    build_index(&cfg).unwrap();
    let path = dir.path().join("corpus.jsonl");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str(r#"{"type":"article","id":"extra","doc_id":"doc0","title":"Điều 99","text":"điều mới"}"#);
    std::fs::write(&path, text).unwrap();
    assert!(matches!(load_pipeline(&cfg), Err(Error::Integrity(_))));
}

#[test]
fn coverage_gap_names_missing_articles() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("vectors.jsonl"),
        "{\"id\":\"a0\",\"vector\":[1.0,0.0]}\n{\"id\":\"a1\",\"vector\":[0.0,1.0]}\n",
    )
    .unwrap();
    let cfg = write_workspace(dir.path(), "[embedder]\nmode = hashing\ndim = 2\narticle_vectors = vectors.jsonl\n");
    match build_index(&cfg) {
        Err(Error::MissingEmbeddings(ids)) => {
            assert_eq!(ids.len(), 28);
            assert!(ids.contains(&"a2".to_string()) && !ids.contains(&"a0".to_string()));
        }
        other => panic!("expected missing embeddings, got {:?}", other.map(|_| ())),
    }
    assert!(matches!(load_pipeline(&cfg), Err(Error::MissingEmbeddings(_))));
}

#[test]
fn missing_files_fail_at_startup() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_workspace(dir.path(), "");
    std::fs::remove_file(dir.path().join("qa.jsonl")).unwrap();
    assert!(matches!(load_pipeline(&cfg), Err(Error::InvalidArgument(m)) if m.contains("qa.jsonl")));
}

fn regqa(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_regqa"))
        .arg("--config")
        .arg(dir.join("regqa.conf"))
        .args(args)
        .env_remove("REGQA_RETRIEVAL_TOP_K")
        .output()
        .unwrap()
}

#[test]
fn cli_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    write_workspace(dir.path(), "");

    let out = regqa(dir.path(), &["build-index"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(manifest["articles"], 30);
    assert!(dir.path().join("idx/manifest.json").is_file());

    let out = regqa(dir.path(), &["query", "--json", "--top-k", "3", "Theo quy định mã3k1 là gì?"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let resp: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(resp["retrieved"].as_array().unwrap().len(), 3);
    assert_eq!(resp["retrieved"][0]["article_id"], "a3");

    let out = regqa(dir.path(), &["query", "Theo quy định mã3k1 là gì?"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Retrieved: a3"), "{text}");

    let out = regqa(dir.path(), &["eval", "--k", "1,5", "--sequential"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 21);
    assert!(lines[0]["p_at_k"]["5"].is_boolean());
    assert_eq!(lines[20]["summary"]["n"], 20);

    let out = regqa(dir.path(), &["eval", "--split", "test", "--k", "1"]);
    let n = String::from_utf8(out.stdout).unwrap().lines().count();
    assert_eq!(n, 2 + 1);

    let out = regqa(dir.path(), &["grid-alpha", "--split", "all", "--k", "1,5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0]["alpha"], 0.1);

    let out = Command::new(env!("CARGO_BIN_EXE_regqa"))
        .args(["--config", "/nonexistent/regqa.conf", "build-index"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = Command::new(env!("CARGO_BIN_EXE_regqa"))
        .arg("--config")
        .arg(dir.path().join("regqa.conf"))
        .args(["query", "Theo quy định mã3k1 là gì?", "--json"])
        .env("REGQA_RETRIEVAL_TOP_K", "2")
        .output()
        .unwrap();
    let resp: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(resp["retrieved"].as_array().unwrap().len(), 2);
}
