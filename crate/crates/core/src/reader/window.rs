use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Overlapping token windows over one context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub max_seq_length: usize,
    pub stride: usize,
    /// Context tokens available per window after the question and special tokens.
    pub budget: usize,
    /// Half-open `[start, end)` token ranges.
    pub windows: Vec<(usize, usize)>,
}

/// Splits `context_len` tokens into windows of at most `budget` tokens, each
/// starting `budget - stride` after the previous one, until the context is
/// covered.
pub fn make_windows(
    question_len: usize,
    context_len: usize,
    max_seq_length: usize,
    stride: usize,
    special_overhead: usize,
) -> Result<WindowPlan> {
    let budget = max_seq_length
        .checked_sub(question_len + special_overhead)
        .filter(|&b| b >= 1)
        .ok_or_else(|| {
            Error::invalid(format!(
                "no room for context: max_seq_length {max_seq_length}, question {question_len}, overhead {special_overhead}"
            ))
        })?;
    if stride >= budget {
        return Err(Error::invalid(format!(
            "stride {stride} must be smaller than the context budget {budget}"
        )));
    }
    let step = budget - stride;
    let mut windows = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + budget).min(context_len);
        windows.push((start, end));
        if end >= context_len {
            break;
        }
        start += step;
    }
    Ok(WindowPlan {
        max_seq_length,
        stride,
        budget,
        windows,
    })
}
