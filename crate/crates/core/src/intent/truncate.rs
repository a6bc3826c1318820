use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub const DEFAULT_MAX_LEN: usize = 512;

/// How an over-long token sequence is cut down to `max_len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TruncationMethod {
    /// Keep the first `max_len` tokens.
    Head,
    /// Keep the last `max_len` tokens.
    #[default]
    Tail,
    /// Keep the central `max_len` tokens.
    Middle,
    /// Keep the first `max_len / 2` and the last `max_len - max_len / 2`.
    Split,
}

impl TruncationMethod {
    pub const ALL: [TruncationMethod; 4] = [
        TruncationMethod::Head,
        TruncationMethod::Tail,
        TruncationMethod::Middle,
        TruncationMethod::Split,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TruncationMethod::Head => "head",
            TruncationMethod::Tail => "tail",
            TruncationMethod::Middle => "middle",
            TruncationMethod::Split => "split",
        }
    }
}

impl fmt::Display for TruncationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TruncationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Invalid(format!("unknown truncation method {s:?}")))
    }
}

/// Index ranges of a length-`n` sequence kept by `method`, in order.
#[allow(clippy::single_range_in_vec_init)]
pub fn kept_ranges(n: usize, max_len: usize, method: TruncationMethod) -> Vec<Range<usize>> {
    if n <= max_len {
        return vec![0..n];
    }
    match method {
        TruncationMethod::Head => vec![0..max_len],
        TruncationMethod::Tail => vec![n - max_len..n],
        TruncationMethod::Middle => {
            let front = (n - max_len) / 2;
            vec![front..front + max_len]
        }
        TruncationMethod::Split => {
            let head = max_len / 2;
            vec![0..head, n - (max_len - head)..n]
        }
    }
}

/// Cut `tokens` to at most `max_len` items.
pub fn truncate<T: Clone>(tokens: &[T], max_len: usize, method: TruncationMethod) -> Vec<T> {
    kept_ranges(tokens.len(), max_len, method)
        .into_iter()
        .flat_map(|r| tokens[r].iter().cloned())
        .collect()
}

/// Tokens of a context as produced by some tokenizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub tokenizer_id: String,
}

impl TokenSequence {
    pub const WHITESPACE: &'static str = "whitespace";

    /// Whitespace tokenization used by the baseline classifier.
    pub fn whitespace(text: &str) -> Self {
        Self {
            tokens: text.split_whitespace().map(str::to_string).collect(),
            tokenizer_id: Self::WHITESPACE.to_string(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn truncated(&self, max_len: usize, method: TruncationMethod) -> Self {
        Self {
            tokens: truncate(&self.tokens, max_len, method),
            tokenizer_id: self.tokenizer_id.clone(),
        }
    }

    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }
}
