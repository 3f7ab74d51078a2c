//! Word segmentation.
//!
//! Text is first split on Unicode whitespace. In dictionary mode, adjacent
//! whitespace tokens that spell a known compound (e.g. `học kỳ`) are merged
//! greedily, longest match first, scanning left to right. Merged surfaces are
//! joined with `_` while offsets still span the original characters.
//!
//! All offsets are Unicode scalar (char) indices into the source text.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    /// Inclusive char offset.
    pub char_start: usize,
    /// Exclusive char offset.
    pub char_end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SegmenterMode {
    #[default]
    Whitespace,
    DictionaryLongestMatch,
}

#[derive(Debug, Clone, Default)]
pub struct Segmenter {
    mode: SegmenterMode,
    /// Compounds stored as their whitespace-separated words.
    compounds: HashSet<Vec<String>>,
    longest: usize,
}

impl Segmenter {
    pub fn whitespace() -> Self {
        Self::default()
    }

    /// Builds a dictionary segmenter. Entries are multi-word compounds written
    /// with single spaces (`"học kỳ"`); single-word entries are ignored since
    /// they never merge anything.
    pub fn with_dictionary<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let compounds: HashSet<Vec<String>> = entries
            .into_iter()
            .map(|e| {
                e.as_ref()
                    .split_whitespace()
                    .map(str::to_owned)
                    .collect::<Vec<_>>()
            })
            .filter(|words| words.len() >= 2)
            .collect();
        let longest = compounds.iter().map(Vec::len).max().unwrap_or(0);
        Segmenter {
            mode: SegmenterMode::DictionaryLongestMatch,
            compounds,
            longest,
        }
    }

    pub fn mode(&self) -> SegmenterMode {
        self.mode
    }

    pub fn segment(&self, text: &str) -> Vec<Token> {
        let words = split_whitespace_tokens(text);
        match self.mode {
            SegmenterMode::Whitespace => words,
            SegmenterMode::DictionaryLongestMatch => self.merge_compounds(words),
        }
    }

    /// Token surfaces only.
    pub fn surfaces(&self, text: &str) -> Vec<String> {
        self.segment(text).into_iter().map(|t| t.surface).collect()
    }

    fn merge_compounds(&self, words: Vec<Token>) -> Vec<Token> {
        let mut out = Vec::with_capacity(words.len());
        let mut i = 0;
        while i < words.len() {
            let max_len = self.longest.min(words.len() - i);
            let matched = (2..=max_len).rev().find(|&len| {
                let key: Vec<String> = words[i..i + len].iter().map(|t| t.surface.clone()).collect();
                self.compounds.contains(&key)
            });
            match matched {
                Some(len) => {
                    let group = &words[i..i + len];
                    out.push(Token {
                        surface: group
                            .iter()
                            .map(|t| t.surface.as_str())
                            .collect::<Vec<_>>()
                            .join("_"),
                        char_start: group[0].char_start,
                        char_end: group[len - 1].char_end,
                    });
                    i += len;
                }
                None => {
                    out.push(words[i].clone());
                    i += 1;
                }
            }
        }
        out
    }
}

fn split_whitespace_tokens(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut pos = 0;
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(Token {
                    surface: std::mem::take(&mut current),
                    char_start: start,
                    char_end: pos,
                });
            }
        } else {
            if current.is_empty() {
                start = pos;
            }
            current.push(ch);
        }
        pos += 1;
    }
    if !current.is_empty() {
        tokens.push(Token {
            surface: current,
            char_start: start,
            char_end: pos,
        });
    }
    tokens
}

/// Substring of `text` between two char offsets.
pub fn char_slice(text: &str, char_start: usize, char_end: usize) -> &str {
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let begin = indices.nth(char_start).unwrap_or(text.len());
    let end = if char_end <= char_start {
        begin
    } else {
        indices.nth(char_end - char_start - 1).unwrap_or(text.len())
    };
    &text[begin..end]
}

/// Rebuilds the source text from tokens and the gaps between them.
pub fn reconstruct(text: &str, tokens: &[Token]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for t in tokens {
        out.push_str(char_slice(text, cursor, t.char_start));
        out.push_str(char_slice(text, t.char_start, t.char_end));
        cursor = t.char_end;
    }
    out.push_str(char_slice(text, cursor, text.chars().count()));
    out
}
