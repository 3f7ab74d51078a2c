//! Dataset evaluation and the fusion-weight sweep.
//!
//! Token F1 and exact match compare extractive answers (with `#` read as a
//! word break for F1). BLEU and ROUGE-L compare abstractive answers.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{validate_qa, QaPair, SPAN_SEPARATOR};
use crate::error::{Error, Result};
use crate::fusion::{FusionConfig, FusionMode, RetrievalResult};
use crate::metrics::{bleu, hit_at_k, precision_at_k, rouge_l, token_f1, BleuConfig, EvalRecord};
use crate::pipeline::Pipeline;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOptions {
    pub ks: Vec<usize>,
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            ks: crate::fusion::TOP_K_GRID.to_vec(),
            parallel: true,
        }
    }
}

impl EvalOptions {
    fn validate(&self) -> Result<()> {
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::invalid("k values must be non-empty and positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    pub qa_id: String,
    pub gold_article_id: String,
    pub predicted_article_id: Option<String>,
    pub p_at_k: BTreeMap<usize, bool>,
    pub f1: f64,
    pub bleu1: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub exact_match: bool,
    pub no_answer: bool,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n: usize,
    pub p_at_k: BTreeMap<usize, f64>,
    pub f1: f64,
    pub bleu1: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub exact_match: f64,
    pub no_answer: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: Vec<QaReport>,
    pub summary: EvalSummary,
}

impl EvalReport {
    /// One JSON object per question, then `{"summary": {...}}`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("report serializes"));
            out.push('\n');
        }
        let summary = serde_json::json!({ "summary": self.summary });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

fn f1_text(s: &str) -> String {
    s.replace(SPAN_SEPARATOR, " ")
}

/// Runs the full pipeline on every pair. Retrieval goes to the largest `k`
/// once; the reader sees only the configured `top_k` of that ranking.
pub fn run_eval(pipeline: &Pipeline, pairs: &[QaPair], opts: &EvalOptions) -> Result<EvalReport> {
    opts.validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid("no QA pairs to evaluate"));
    }
    validate_qa(pairs, pipeline.corpus())?;
    let read_k = pipeline.settings().fusion.top_k;
    let deep = FusionConfig {
        top_k: opts.ks.iter().copied().max().unwrap_or(1).max(read_k),
        ..pipeline.settings().fusion
    };

    let one = |pair: &QaPair| -> Result<(QaReport, EvalRecord)> {
        let (full, issue) = pipeline.retrieve(&pair.question, &deep)?;
        let shallow = RetrievalResult {
            ranked: full.ranked.iter().take(read_k).cloned().collect(),
        };
        let resp = pipeline.answer_from(&pair.question, shallow, issue.into_iter().collect())?;
        let record = EvalRecord {
            qa_id: pair.qa_id.clone(),
            gold_article_id: pair.article_id.clone(),
            retrieved_ids: full.ids(),
            predicted_extractive: resp.extractive.clone().unwrap_or_default(),
            predicted_abstractive: resp.abstractive.clone().unwrap_or_default(),
        };
        let seg = pipeline.segmenter();
        let gold_abs = [pair.abstractive_answer.as_str()];
        let report = QaReport {
            qa_id: pair.qa_id.clone(),
            gold_article_id: pair.article_id.clone(),
            predicted_article_id: resp.article_id.clone(),
            p_at_k: opts.ks.iter().map(|&k| (k, hit_at_k(&record, k))).collect(),
            f1: token_f1(
                &f1_text(&record.predicted_extractive),
                &f1_text(&pair.extractive_answer),
                seg,
            )
            .f1,
            bleu1: bleu(&record.predicted_abstractive, &gold_abs, &BleuConfig::bleu1(), seg)?,
            bleu4: bleu(&record.predicted_abstractive, &gold_abs, &BleuConfig::bleu4(), seg)?,
            rouge_l: rouge_l(&record.predicted_abstractive, &pair.abstractive_answer, seg).f1,
            exact_match: record.predicted_extractive.trim() == pair.extractive_answer.trim(),
            no_answer: resp.no_answer,
            degraded: !resp.degraded.is_empty(),
        };
        Ok((report, record))
    };

    let results: Vec<(QaReport, EvalRecord)> = if opts.parallel {
        pairs.par_iter().map(one).collect::<Result<_>>()?
    } else {
        pairs.iter().map(one).collect::<Result<_>>()?
    };
    let (records, eval_records): (Vec<QaReport>, Vec<EvalRecord>) = results.into_iter().unzip();

    let n = records.len();
    let mean = |f: fn(&QaReport) -> f64| records.iter().map(f).sum::<f64>() / n as f64;
    let summary = EvalSummary {
        n,
        p_at_k: opts
            .ks
            .iter()
            .map(|&k| Ok((k, precision_at_k(&eval_records, k)?)))
            .collect::<Result<_>>()?,
        f1: mean(|r| r.f1),
        bleu1: mean(|r| r.bleu1),
        bleu4: mean(|r| r.bleu4),
        rouge_l: mean(|r| r.rouge_l),
        exact_match: mean(|r| f64::from(u8::from(r.exact_match))),
        no_answer: records.iter().filter(|r| r.no_answer).count(),
    };
    Ok(EvalReport { records, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub alpha: f64,
    pub p_at_k: BTreeMap<usize, f64>,
}

/// P@k of weighted fusion for alpha = 0.1, 0.2, ..., 0.9. Component scores
/// are computed once per question and re-fused for each alpha.
pub fn grid_alpha(pipeline: &Pipeline, pairs: &[QaPair], ks: &[usize]) -> Result<Vec<AlphaRow>> {
    EvalOptions {
        ks: ks.to_vec(),
        parallel: false,
    }
    .validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid("no QA pairs to evaluate"));
    }
    validate_qa(pairs, pipeline.corpus())?;
    let base = pipeline.settings().fusion;
    let max_k = ks.iter().copied().max().unwrap_or(1);
    let retriever = pipeline.retriever();
    let ids = retriever.index().article_ids();
    let components = pairs
        .par_iter()
        .map(|p| {
            retriever.components(&p.question, pipeline.embedder(), pipeline.segmenter(), base.lexical, true)
        })
        .collect::<Result<Vec<_>>>()?;

    (1..=9)
        .map(|step| {
            let cfg = FusionConfig {
                mode: FusionMode::Weight,
                alpha: f64::from(step) / 10.0,
                top_k: max_k,
                ..base
            };
            let records = pairs
                .iter()
                .zip(&components)
                .map(|(pair, parts)| {
                    Ok(EvalRecord {
                        qa_id: pair.qa_id.clone(),
                        gold_article_id: pair.article_id.clone(),
                        retrieved_ids: parts.rank(ids, &cfg)?.ids(),
                        predicted_extractive: String::new(),
                        predicted_abstractive: String::new(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AlphaRow {
                alpha: cfg.alpha,
                p_at_k: ks
                    .iter()
                    .map(|&k| Ok((k, precision_at_k(&records, k)?)))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{oracle_pipeline, SyntheticParams};

    #[test]
    fn oracle_run_is_perfect() {
        let data = SyntheticParams::default().generate(7);
        let p = oracle_pipeline(&data, 5).unwrap();
        let report = run_eval(&p, &data.qa, &EvalOptions::default()).unwrap();
        let s = &report.summary;
        assert_eq!(s.n, data.qa.len());
        assert_eq!(s.exact_match, 1.0);
        assert_eq!((s.f1, s.bleu1, s.rouge_l), (1.0, 1.0, 1.0));
        assert_eq!(s.p_at_k[&5], 1.0);
        let k: Vec<_> = s.p_at_k.values().copied().collect();
        assert!(k.windows(2).all(|w| w[0] <= w[1]));
        let lines = report.to_jsonl();
        assert_eq!(lines.lines().count(), data.qa.len() + 1);
        assert!(lines.lines().last().unwrap().starts_with(r#"{"summary":"#));
    }

    #[test]
    fn parallel_matches_sequential() {
        let data = SyntheticParams::default().generate(3);
        let p = oracle_pipeline(&data, 3).unwrap();
        let par = run_eval(&p, &data.qa, &EvalOptions::default()).unwrap();
        let seq = run_eval(&p, &data.qa, &EvalOptions { parallel: false, ..Default::default() }).unwrap();
        assert_eq!(par.to_jsonl(), seq.to_jsonl());
    }

    #[test]
    fn grid_rows() {
        let data = SyntheticParams::default().generate(11);
        let p = oracle_pipeline(&data, 5).unwrap();
        let rows = grid_alpha(&p, &data.qa, &[1, 5, 10]).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0].alpha, 0.1);
        assert_eq!(rows[8].alpha, 0.9);
        for r in &rows {
            assert!(r.p_at_k[&1] <= r.p_at_k[&5] && r.p_at_k[&5] <= r.p_at_k[&10]);
        }
    }

    #[test]
    fn rejects_bad_options() {
        let data = SyntheticParams::default().generate(1);
        let p = oracle_pipeline(&data, 5).unwrap();
        for ks in [vec![], vec![0, 1]] {
            assert!(run_eval(&p, &data.qa, &EvalOptions { ks, parallel: false }).is_err());
        }
        assert!(run_eval(&p, &[], &EvalOptions::default()).is_err());
        let mut bad = data.qa.clone();
        bad[0].article_id = "missing".into();
        assert!(matches!(
            run_eval(&p, &bad, &EvalOptions::default()),
            Err(Error::Validation(_))
        ));
    }
}
