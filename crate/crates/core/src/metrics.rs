//! Retrieval and answer-quality metrics: P@k, token F1, sentence BLEU,
//! ROUGE-N and ROUGE-L. Text metrics tokenize with the supplied segmenter
//! and compare surfaces exactly.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::Segmenter;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub qa_id: String,
    pub gold_article_id: String,
    pub retrieved_ids: Vec<String>,
    pub predicted_extractive: String,
    pub predicted_abstractive: String,
}

/// Fraction of records whose gold article is among the first `k` retrieved.
pub fn precision_at_k(records: &[EvalRecord], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if records.is_empty() {
        return Err(Error::invalid("no records to score"));
    }
    let mut hits = 0usize;
    for r in records {
        if r.retrieved_ids.is_empty() {
            return Err(Error::invalid(format!("record `{}` has no retrieved ids", r.qa_id)));
        }
        if hit_at_k(r, k) {
            hits += 1;
        }
    }
    Ok(hits as f64 / records.len() as f64)
}

pub fn hit_at_k(record: &EvalRecord, k: usize) -> bool {
    record
        .retrieved_ids
        .iter()
        .take(k)
        .any(|id| *id == record.gold_article_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    const PERFECT: Prf = Prf {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };
    const ZERO: Prf = Prf {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    fn from_overlap(overlap: usize, predicted: usize, gold: usize) -> Prf {
        if overlap == 0 || predicted == 0 || gold == 0 {
            return Prf::ZERO;
        }
        let precision = overlap as f64 / predicted as f64;
        let recall = overlap as f64 / gold as f64;
        Prf {
            precision,
            recall,
            f1: 2.0 * precision * recall / (precision + recall),
        }
    }
}

fn counts<T: std::hash::Hash + Eq>(items: impl IntoIterator<Item = T>) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for it in items {
        *m.entry(it).or_insert(0) += 1;
    }
    m
}

fn clipped_overlap<T: std::hash::Hash + Eq>(pred: &HashMap<T, usize>, gold: &HashMap<T, usize>) -> usize {
    pred.iter()
        .map(|(g, &c)| c.min(gold.get(g).copied().unwrap_or(0)))
        .sum()
}

fn ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> impl Iterator<Item = Vec<&str>> + '_ {
    tokens
        .windows(n.max(1))
        .filter(move |_| n >= 1 && tokens.len() >= n)
        .map(|w| w.iter().map(AsRef::as_ref).collect())
}

/// Multiset token overlap F1.
pub fn token_f1(predicted: &str, gold: &str, seg: &Segmenter) -> Prf {
    token_f1_tokens(&seg.surfaces(predicted), &seg.surfaces(gold))
}

pub fn token_f1_tokens<S: AsRef<str>>(predicted: &[S], gold: &[S]) -> Prf {
    if predicted.is_empty() && gold.is_empty() {
        return Prf::PERFECT;
    }
    let p = counts(predicted.iter().map(AsRef::as_ref));
    let g = counts(gold.iter().map(AsRef::as_ref));
    Prf::from_overlap(clipped_overlap(&p, &g), predicted.len(), gold.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_n: usize,
    pub weights: Vec<f64>,
    /// Add-one smoothing on orders above 1. Off for sentence-level scoring.
    pub smoothing: bool,
}

impl BleuConfig {
    pub fn uniform(max_n: usize) -> Self {
        BleuConfig {
            max_n,
            weights: vec![1.0 / max_n as f64; max_n],
            smoothing: false,
        }
    }

    pub fn bleu1() -> Self {
        Self::uniform(1)
    }

    pub fn bleu4() -> Self {
        Self::uniform(4)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_n == 0 || self.weights.len() != self.max_n {
            return Err(Error::invalid("BLEU needs max_n >= 1 and one weight per order"));
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("BLEU weights must sum to 1"));
        }
        Ok(())
    }
}

/// Sentence BLEU against one or more references with per-reference clipping
/// and a brevity penalty from the closest reference length.
pub fn bleu<S: AsRef<str>>(predicted: &str, references: &[S], cfg: &BleuConfig, seg: &Segmenter) -> Result<f64> {
    let refs: Vec<Vec<String>> = references.iter().map(|r| seg.surfaces(r.as_ref())).collect();
    bleu_tokens(&seg.surfaces(predicted), &refs, cfg)
}

pub fn bleu_tokens<S: AsRef<str>>(predicted: &[S], references: &[Vec<S>], cfg: &BleuConfig) -> Result<f64> {
    cfg.validate()?;
    if references.is_empty() {
        return Err(Error::invalid("BLEU needs at least one reference"));
    }
    if predicted.is_empty() {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for (order, &w) in (1..=cfg.max_n).zip(&cfg.weights) {
        let pred = counts(ngrams(predicted, order));
        let total: usize = pred.values().sum();
        let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
        for r in references {
            for (g, c) in counts(ngrams(r, order)) {
                let slot = max_ref.entry(g).or_insert(0);
                *slot = (*slot).max(c);
            }
        }
        let matched = clipped_overlap(&pred, &max_ref);
        let p = if cfg.smoothing && order > 1 {
            (matched as f64 + 1.0) / (total as f64 + 1.0)
        } else if total == 0 {
            0.0
        } else {
            matched as f64 / total as f64
        };
        if p == 0.0 {
            return Ok(0.0);
        }
        log_sum += w * p.ln();
    }
    let c = predicted.len();
    let r = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("non-empty references");
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    Ok(bp * log_sum.exp())
}

/// Clipped n-gram overlap.
pub fn rouge_n(predicted: &str, gold: &str, n: usize, seg: &Segmenter) -> Result<Prf> {
    rouge_n_tokens(&seg.surfaces(predicted), &seg.surfaces(gold), n)
}

pub fn rouge_n_tokens<S: AsRef<str>>(predicted: &[S], gold: &[S], n: usize) -> Result<Prf> {
    if n == 0 {
        return Err(Error::invalid("ROUGE-N needs n >= 1"));
    }
    if predicted.is_empty() && gold.is_empty() {
        return Ok(Prf::PERFECT);
    }
    let p = counts(ngrams(predicted, n));
    let g = counts(ngrams(gold, n));
    Ok(Prf::from_overlap(
        clipped_overlap(&p, &g),
        p.values().sum(),
        g.values().sum(),
    ))
}

/// Longest-common-subsequence based ROUGE.
pub fn rouge_l(predicted: &str, gold: &str, seg: &Segmenter) -> Prf {
    rouge_l_tokens(&seg.surfaces(predicted), &seg.surfaces(gold))
}

pub fn rouge_l_tokens<S: AsRef<str>>(predicted: &[S], gold: &[S]) -> Prf {
    if predicted.is_empty() && gold.is_empty() {
        return Prf::PERFECT;
    }
    Prf::from_overlap(lcs_len(predicted, gold), predicted.len(), gold.len())
}

pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x.as_ref() == y.as_ref() {
                diag + 1
            } else {
                up.max(row[j])
            };
            diag = up;
        }
    }
    row[b.len()]
}
