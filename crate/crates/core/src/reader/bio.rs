//! B/I/O tag decoding into character spans.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::Token;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    B,
    I,
    O,
}

/// Probabilities `[p_B, p_I, p_O]` for one token.
pub type LabelProbs = [f64; 3];

/// Checks that every triple is a probability distribution.
pub fn validate_probs(probs: &[LabelProbs]) -> Result<()> {
    for (i, p) in probs.iter().enumerate() {
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid(format!("token {i}: negative or non-finite probability")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("token {i}: probabilities sum to {sum}")));
        }
    }
    Ok(())
}

/// Argmax label with ties resolved B, then I, then O.
pub fn argmax(p: &LabelProbs) -> (Label, f64) {
    let [b, i, o] = *p;
    if b >= i && b >= o {
        (Label::B, b)
    } else if i >= o {
        (Label::I, i)
    } else {
        (Label::O, o)
    }
}

/// One-hot distribution for a label.
pub fn one_hot(label: Label) -> LabelProbs {
    match label {
        Label::B => [1.0, 0.0, 0.0],
        Label::I => [0.0, 1.0, 0.0],
        Label::O => [0.0, 0.0, 1.0],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub char_start: usize,
    pub char_end: usize,
    pub score: f64,
}

/// Inclusive token range of a decoded span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenSpan {
    pub first: usize,
    pub last: usize,
    pub score: f64,
}

/// Decodes argmax tags into token ranges. `B` opens a span, `I` extends the
/// open one (or opens a new one when none is open), `O` closes. A span's
/// score is the mean of its tokens' winning probabilities.
pub fn decode_token_spans(probs: &[LabelProbs]) -> Vec<TokenSpan> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, f64)> = None;
    let close = |open: &mut Option<(usize, f64)>, last: usize, spans: &mut Vec<TokenSpan>| {
        if let Some((first, sum)) = open.take() {
            spans.push(TokenSpan {
                first,
                last,
                score: sum / (last - first + 1) as f64,
            });
        }
    };
    for (i, p) in probs.iter().enumerate() {
        let (label, prob) = argmax(p);
        match label {
            Label::B => {
                if i > 0 {
                    close(&mut open, i - 1, &mut spans);
                }
                open = Some((i, prob));
            }
            Label::I => match &mut open {
                Some((_, sum)) => *sum += prob,
                None => open = Some((i, prob)),
            },
            Label::O => {
                if i > 0 {
                    close(&mut open, i - 1, &mut spans);
                }
            }
        }
    }
    if !probs.is_empty() {
        close(&mut open, probs.len() - 1, &mut spans);
    }
    spans
}

pub fn decode_bio(tokens: &[Token], probs: &[LabelProbs]) -> Result<Vec<Span>> {
    if tokens.len() != probs.len() {
        return Err(Error::invalid(format!(
            "{} tokens but {} label distributions",
            tokens.len(),
            probs.len()
        )));
    }
    Ok(decode_token_spans(probs)
        .into_iter()
        .map(|s| Span {
            char_start: tokens[s.first].char_start,
            char_end: tokens[s.last].char_end,
            score: s.score,
        })
        .collect())
}

/// Tags tokens for a set of inclusive token ranges: first token `B`, rest `I`.
pub fn encode_bio(len: usize, ranges: &[(usize, usize)]) -> Vec<Label> {
    let mut labels = vec![Label::O; len];
    for &(first, last) in ranges {
        for (k, l) in labels.iter_mut().enumerate().take(last + 1).skip(first) {
            *l = if k == first { Label::B } else { Label::I };
        }
    }
    labels
}

/// Unions spans whose character ranges overlap, keeping the highest score.
pub fn merge_window_spans(mut spans: Vec<Span>) -> Vec<Span> {
    spans.sort_by(|a, b| a.char_start.cmp(&b.char_start).then(a.char_end.cmp(&b.char_end)));
    let mut merged: Vec<Span> = Vec::with_capacity(spans.len());
    for s in spans {
        match merged.last_mut() {
            Some(prev) if s.char_start < prev.char_end => {
                prev.char_end = prev.char_end.max(s.char_end);
                prev.score = prev.score.max(s.score);
            }
            _ => merged.push(s),
        }
    }
    merged
}
