//! Extractive reader: windows a context, asks a labeler for B/I/O
//! distributions, decodes and merges spans, then picks the best answer
//! across retrieved contexts.

pub mod bio;
pub mod labeler;
pub mod window;

use serde::{Deserialize, Serialize};

use crate::corpus::SPAN_SEPARATOR;
use crate::error::{Error, Result, TransportError};
use crate::segment::{char_slice, Token};

pub use bio::{decode_bio, merge_window_spans, Label, LabelProbs, Span};
pub use labeler::{GoldLabeler, LabelRequest, Labeler, OutsideLabeler, OverlapLabeler};
pub use window::{make_windows, WindowPlan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReaderParams {
    pub max_seq_length: usize,
    pub stride: usize,
    /// Special tokens added around question and context by the model.
    pub special_overhead: usize,
}

impl Default for ReaderParams {
    fn default() -> Self {
        ReaderParams {
            max_seq_length: 512,
            stride: 128,
            special_overhead: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractiveAnswer {
    pub article_id: String,
    /// Ordered by `char_start`, non-overlapping.
    pub spans: Vec<Span>,
    /// Span surfaces joined by `#`.
    pub text: String,
    pub reader_score: f64,
}

impl ExtractiveAnswer {
    pub fn from_spans(article_id: &str, article_text: &str, spans: Vec<Span>) -> Option<Self> {
        if spans.is_empty() {
            return None;
        }
        let text = spans
            .iter()
            .map(|s| char_slice(article_text, s.char_start, s.char_end))
            .collect::<Vec<_>>()
            .join(&SPAN_SEPARATOR.to_string());
        let reader_score = spans.iter().map(|s| s.score).sum::<f64>() / spans.len() as f64;
        Some(ExtractiveAnswer {
            article_id: article_id.to_owned(),
            spans,
            text,
            reader_score,
        })
    }
}

/// An article to read, with tokens from the pipeline's segmenter.
#[derive(Debug, Clone, Copy)]
pub struct ArticleView<'a> {
    pub article_id: &'a str,
    pub text: &'a str,
    pub tokens: &'a [Token],
}

pub fn read_article(
    question: &str,
    question_tokens: &[String],
    article: ArticleView<'_>,
    labeler: &dyn Labeler,
    params: &ReaderParams,
) -> Result<Option<ExtractiveAnswer>> {
    let plan = make_windows(
        question_tokens.len(),
        article.tokens.len(),
        params.max_seq_length,
        params.stride,
        params.special_overhead,
    )?;
    let surfaces: Vec<String> = article.tokens.iter().map(|t| t.surface.clone()).collect();
    let mut spans = Vec::new();
    for &(start, end) in &plan.windows {
        if start == end {
            continue;
        }
        let req = LabelRequest {
            question,
            article_id: article.article_id,
            question_tokens,
            context_tokens: &surfaces[start..end],
            window_start: start,
        };
        let probs = labeler.label(&req)?;
        if probs.len() != end - start {
            return Err(TransportError::Malformed(format!(
                "expected {} label rows, got {}",
                end - start,
                probs.len()
            ))
            .into());
        }
        bio::validate_probs(&probs)
            .map_err(|e| TransportError::Malformed(e.to_string()))?;
        spans.extend(decode_bio(&article.tokens[start..end], &probs)?);
    }
    Ok(ExtractiveAnswer::from_spans(
        article.article_id,
        article.text,
        merge_window_spans(spans),
    ))
}

/// A retrieved context and what the reader made of it, in retrieval order.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub retrieval_score: f64,
    pub answer: Option<ExtractiveAnswer>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    /// Position in the candidate list.
    pub index: usize,
    pub retrieval_norm: f64,
    pub final_score: f64,
}

/// `lambda * normalised retrieval + (1 - lambda) * reader score`, over the
/// candidates that produced an answer. Retrieval scores are min-max
/// normalised across those candidates; ties go to the earlier candidate.
pub fn select_best(candidates: &[Candidate], lambda: f64) -> Result<Selection> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must be in [0, 1], got {lambda}")));
    }
    let answered: Vec<(usize, f64, f64)> = candidates
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.answer.as_ref().map(|a| (i, c.retrieval_score, a.reader_score)))
        .collect();
    if answered.is_empty() {
        return Err(Error::NoAnswer);
    }
    let retrieval: Vec<f64> = answered.iter().map(|a| a.1).collect();
    let norm = crate::dense::min_max_normalize(&retrieval)?;
    let mut best: Option<Selection> = None;
    for (&(index, _, reader), &retrieval_norm) in answered.iter().zip(&norm) {
        let final_score = lambda * retrieval_norm + (1.0 - lambda) * reader;
        if best.is_none_or(|b| final_score > b.final_score) {
            best = Some(Selection {
                index,
                retrieval_norm,
                final_score,
            });
        }
    }
    Ok(best.expect("at least one answered candidate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, CorpusRecord, QaPair};
    use crate::segment::Segmenter;

    const TEXT: &str = "Năm học gồm hai học kỳ chính và một học kỳ hè theo quy định của trường đại học";

    fn article_tokens() -> Vec<Token> {
        Segmenter::whitespace().segment(TEXT)
    }

    fn corpus() -> Corpus {
        Corpus::from_records(
            vec![
                CorpusRecord::Document { id: "d".into(), title: "Quy chế".into() },
                CorpusRecord::Article {
                    id: "a".into(),
                    doc_id: "d".into(),
                    title: "Điều 1".into(),
                    text: TEXT.into(),
                },
            ],
            &Segmenter::whitespace(),
        )
        .unwrap()
    }

    fn qa(answer: &str) -> QaPair {
        QaPair {
            qa_id: "q1".into(),
            question: "Năm học có những học kỳ nào?".into(),
            article_id: "a".into(),
            extractive_answer: answer.into(),
            abstractive_answer: String::new(),
        }
    }

    fn read(labeler: &dyn Labeler, params: &ReaderParams, question: &str) -> Option<ExtractiveAnswer> {
        let tokens = article_tokens();
        let qt = Segmenter::whitespace().surfaces(question);
        read_article(
            question,
            &qt,
            ArticleView { article_id: "a", text: TEXT, tokens: &tokens },
            labeler,
            params,
        )
        .unwrap()
    }

    #[test]
    fn gold_labeler_round_trips_answer() {
        let pair = qa("học kỳ chính#học kỳ hè");
        let labeler = GoldLabeler::new(&corpus(), &[pair.clone()], &Segmenter::whitespace());
        let ans = read(&labeler, &ReaderParams::default(), &pair.question).unwrap();
        assert_eq!(ans.text, "học kỳ chính#học kỳ hè");
        assert_eq!(ans.reader_score, 1.0);
        assert_eq!(ans.spans.len(), 2);
    }

    #[test]
    fn all_outside_gives_none() {
        assert!(read(&OutsideLabeler, &ReaderParams::default(), "q").is_none());
    }

    #[test]
    fn windowing_does_not_change_spans() {
        let pair = qa("học kỳ chính#học kỳ hè");
        let labeler = GoldLabeler::new(&corpus(), &[pair.clone()], &Segmenter::whitespace());
        let whole = read(&labeler, &ReaderParams::default(), &pair.question).unwrap();
        let q_len = Segmenter::whitespace().segment(&pair.question).len();
        for (budget, stride) in [(5, 2), (4, 1), (7, 3), (3, 1), (20, 0)] {
            let tiny = ReaderParams {
                max_seq_length: q_len + 2 + budget,
                stride,
                special_overhead: 2,
            };
            let windowed = read(&labeler, &tiny, &pair.question).unwrap();
            assert_eq!(windowed.spans, whole.spans, "budget {budget} stride {stride}");
        }
    }

    #[test]
    fn span_cut_without_overlap_splits() {
        // stride 0 and a boundary inside "học kỳ chính": the halves never overlap
        let pair = qa("học kỳ chính");
        let labeler = GoldLabeler::new(&corpus(), &[pair.clone()], &Segmenter::whitespace());
        let q_len = Segmenter::whitespace().segment(&pair.question).len();
        let p = ReaderParams { max_seq_length: q_len + 2 + 5, stride: 0, special_overhead: 2 };
        let ans = read(&labeler, &p, &pair.question).unwrap();
        assert_eq!(ans.text, "học#kỳ chính");
    }

    struct Broken;
    impl Labeler for Broken {
        fn label(&self, _: &LabelRequest<'_>) -> Result<Vec<LabelProbs>, TransportError> {
            Ok(vec![[1.0, 0.0, 0.0]])
        }
    }

    struct Slow;
    impl Labeler for Slow {
        fn label(&self, _: &LabelRequest<'_>) -> Result<Vec<LabelProbs>, TransportError> {
            Err(TransportError::Timeout)
        }
    }

    #[test]
    fn labeler_failures_are_transport_errors() {
        let tokens = article_tokens();
        let view = ArticleView { article_id: "a", text: TEXT, tokens: &tokens };
        let p = ReaderParams::default();
        assert!(matches!(
            read_article("q", &[], view, &Broken, &p),
            Err(Error::Transport(TransportError::Malformed(_)))
        ));
        assert!(matches!(
            read_article("q", &[], view, &Slow, &p),
            Err(Error::Transport(TransportError::Timeout))
        ));
    }

    fn cand(retrieval: f64, reader: Option<f64>) -> Candidate {
        Candidate {
            retrieval_score: retrieval,
            answer: reader.map(|r| ExtractiveAnswer {
                article_id: "x".into(),
                spans: vec![Span { char_start: 0, char_end: 1, score: r }],
                text: "x".into(),
                reader_score: r,
            }),
        }
    }

    #[test]
    fn select_best_boundaries() {
        let cands = [cand(5.0, Some(0.2)), cand(3.0, None), cand(1.0, Some(0.9))];
        assert_eq!(select_best(&cands, 0.0).unwrap().index, 2);
        assert_eq!(select_best(&cands, 1.0).unwrap().index, 0);
        let no_top = [cand(5.0, None), cand(3.0, Some(0.1)), cand(1.0, Some(0.9))];
        assert_eq!(select_best(&no_top, 1.0).unwrap().index, 1);
    }

    #[test]
    fn select_best_blend() {
        let s = select_best(&[cand(1.0, Some(0.2)), cand(0.0, Some(0.9))], 0.5).unwrap();
        assert_eq!(s.index, 0);
        assert!((s.final_score - 0.6).abs() < 1e-12);
        let tie = select_best(&[cand(1.0, Some(0.5)), cand(1.0, Some(0.5))], 0.3).unwrap();
        assert_eq!(tie.index, 0);
    }

    #[test]
    fn select_best_no_answer() {
        assert!(matches!(select_best(&[cand(1.0, None)], 0.3), Err(Error::NoAnswer)));
        assert!(matches!(select_best(&[], 0.3), Err(Error::NoAnswer)));
        assert!(select_best(&[cand(1.0, Some(0.1))], 1.5).is_err());
    }
}
