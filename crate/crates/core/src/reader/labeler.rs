//! Per-token B/I/O labelers: the trait the reader calls, plus offline stubs.

use std::collections::{HashMap, HashSet};

use crate::corpus::{Corpus, QaPair};
use crate::error::TransportError;
use crate::lexical::term_key;
use crate::reader::bio::{encode_bio, one_hot, Label, LabelProbs};
use crate::segment::{Segmenter, Token};

/// One window's worth of labelling work. Only the token lists go over the
/// wire; the ids and offsets let in-process labelers locate the window.
#[derive(Debug, Clone, Copy)]
pub struct LabelRequest<'a> {
    pub question: &'a str,
    pub article_id: &'a str,
    pub question_tokens: &'a [String],
    pub context_tokens: &'a [String],
    /// Position of `context_tokens[0]` within the article's tokens.
    pub window_start: usize,
}

pub trait Labeler: Send + Sync {
    /// One `[p_B, p_I, p_O]` triple per context token.
    fn label(&self, req: &LabelRequest<'_>) -> Result<Vec<LabelProbs>, TransportError>;
}

/// Labels everything O.
#[derive(Debug, Clone, Copy, Default)]
pub struct OutsideLabeler;

impl Labeler for OutsideLabeler {
    fn label(&self, req: &LabelRequest<'_>) -> Result<Vec<LabelProbs>, TransportError> {
        Ok(vec![one_hot(Label::O); req.context_tokens.len()])
    }
}

/// Marks context tokens that repeat a question term occurring at most
/// `max_window_freq` times in the window. Runs of marked tokens become spans.
#[derive(Debug, Clone)]
pub struct OverlapLabeler {
    pub min_chars: usize,
    pub max_window_freq: usize,
}

impl Default for OverlapLabeler {
    fn default() -> Self {
        OverlapLabeler {
            min_chars: 2,
            max_window_freq: 2,
        }
    }
}

fn bare_key(surface: &str) -> String {
    term_key(surface.trim_matches(|c: char| !c.is_alphanumeric() && c != '_'))
}

impl Labeler for OverlapLabeler {
    fn label(&self, req: &LabelRequest<'_>) -> Result<Vec<LabelProbs>, TransportError> {
        let keys: Vec<String> = req.context_tokens.iter().map(|t| bare_key(t)).collect();
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for k in &keys {
            *freq.entry(k.as_str()).or_default() += 1;
        }
        let wanted: HashSet<String> = req
            .question_tokens
            .iter()
            .map(|t| bare_key(t))
            .filter(|k| k.chars().count() >= self.min_chars)
            .filter(|k| freq.get(k.as_str()).is_some_and(|&n| n <= self.max_window_freq))
            .collect();
        let mut out = Vec::with_capacity(keys.len());
        let mut prev_marked = false;
        for k in &keys {
            let marked = wanted.contains(k);
            out.push(match (marked, prev_marked) {
                (true, false) => [0.8, 0.1, 0.1],
                (true, true) => [0.1, 0.8, 0.1],
                (false, _) => [0.05, 0.05, 0.9],
            });
            prev_marked = marked;
        }
        Ok(out)
    }
}

/// Test oracle: emits the gold B/I/O tags of each QA pair's article and O
/// everywhere else.
#[derive(Debug, Clone, Default)]
pub struct GoldLabeler {
    gold: HashMap<(String, String), Vec<Label>>,
}

impl GoldLabeler {
    pub fn new(corpus: &Corpus, pairs: &[QaPair], seg: &Segmenter) -> Self {
        let mut gold = HashMap::new();
        for p in pairs {
            let Some(article) = corpus.article(&p.article_id) else {
                continue;
            };
            let tokens = seg.segment(&article.text);
            let spans: Vec<&str> = p.spans().collect();
            let ranges = gold_token_ranges(&article.text, &tokens, &spans);
            gold.insert(
                (p.question.clone(), p.article_id.clone()),
                encode_bio(tokens.len(), &ranges),
            );
        }
        GoldLabeler { gold }
    }
}

impl Labeler for GoldLabeler {
    fn label(&self, req: &LabelRequest<'_>) -> Result<Vec<LabelProbs>, TransportError> {
        let n = req.context_tokens.len();
        let key = (req.question.to_owned(), req.article_id.to_owned());
        let Some(labels) = self.gold.get(&key) else {
            return Ok(vec![one_hot(Label::O); n]);
        };
        let window = labels
            .get(req.window_start..req.window_start + n)
            .ok_or_else(|| TransportError::Malformed("window outside gold article".into()))?;
        // a window opening mid-span starts with I, which the decoder accepts
        Ok(window.iter().map(|&l| one_hot(l)).collect())
    }
}

/// Locates each span verbatim in `text` (first occurrence not already used)
/// and returns the inclusive token range covering it, sorted by position.
pub fn gold_token_ranges(text: &str, tokens: &[Token], spans: &[&str]) -> Vec<(usize, usize)> {
    let mut taken: Vec<(usize, usize)> = Vec::new();
    for span in spans {
        if span.is_empty() {
            continue;
        }
        let found = text.match_indices(span).find_map(|(byte, _)| {
            let start = text[..byte].chars().count();
            let end = start + span.chars().count();
            let first = tokens.iter().position(|t| t.char_end > start)?;
            let last = tokens.iter().rposition(|t| t.char_start < end)?;
            let clash = taken.iter().any(|&(a, b)| first <= b && a <= last);
            (first <= last && !clash).then_some((first, last))
        });
        if let Some(range) = found {
            taken.push(range);
        }
    }
    taken.sort_unstable();
    taken
}
