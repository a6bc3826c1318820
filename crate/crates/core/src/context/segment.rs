use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::registry::url_tokens;

/// Words ending in a period that never close a sentence (compared
/// lowercased, trailing period included).
const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "al.", "fig.", "figs.", "vs.", "cf.", "approx.", "ca.", "eq.", "eqs.", "ref.",
    "refs.", "no.", "nos.", "vol.", "pp.", "p.", "sp.", "spp.", "tab.", "dr.", "prof.", "mr.",
    "mrs.", "ms.", "st.", "suppl.", "resp.", "viz.",
];

/// Sentence spans of a document body, as byte offsets into `body_text`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SentenceIndex {
    pub spans: Vec<(usize, usize)>,
}

impl SentenceIndex {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Ordinal of the sentence containing byte `offset`.
    pub fn sentence_at(&self, offset: usize) -> Option<usize> {
        let i = self.spans.partition_point(|&(s, _)| s <= offset);
        let i = i.checked_sub(1)?;
        (offset < self.spans[i].1).then_some(i)
    }

    pub fn text<'a>(&self, body: &'a str, ordinal: usize) -> &'a str {
        let (s, e) = self.spans[ordinal];
        &body[s..e]
    }
}

fn is_abbreviation(word: &str) -> bool {
    let lower = word.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // Initials such as "J." or "A.B."
    let mut chars = word.chars();
    let mut saw = false;
    loop {
        match (chars.next(), chars.next()) {
            (None, _) => return saw,
            (Some(c), Some('.')) if c.is_uppercase() => saw = true,
            _ => return false,
        }
    }
}

/// URL tokens proper, as opposed to ordinary words that happen to be made
/// of URL characters.
fn looks_like_url(token: &str) -> bool {
    if token.contains("://") || token.get(..4).is_some_and(|p| p.eq_ignore_ascii_case("www.")) {
        return true;
    }
    token
        .find('/')
        .is_some_and(|slash| token[..slash].contains('.'))
}

/// Rule-based sentence segmentation.
///
/// A sentence ends at `.`, `?` or `!` (plus closing brackets or quotes)
/// followed by whitespace and an uppercase letter or digit, unless the
/// period ends a protected abbreviation or lies inside a URL token. Line
/// breaks always end a sentence.
pub fn segment_sentences(doc: &Document) -> SentenceIndex {
    segment_text(&doc.body_text)
}

pub fn segment_text(text: &str) -> SentenceIndex {
    let bytes = text.as_bytes();
    let tokens: Vec<(usize, usize)> = url_tokens(text)
        .filter(|&(s, e)| looks_like_url(&text[s..e]))
        .collect();
    let in_token = |i: usize| {
        let k = tokens.partition_point(|&(s, _)| s <= i);
        k > 0 && i < tokens[k - 1].1
    };

    let mut spans = Vec::new();
    let mut push = |s: usize, e: usize| {
        let seg = &text[s..e];
        let lead = seg.len() - seg.trim_start().len();
        let trail = seg.len() - seg.trim_end().len();
        if s + lead < e - trail {
            spans.push((s + lead, e - trail));
        }
    };

    let mut line_start = 0;
    for line in text.split('\n') {
        let line_end = line_start + line.len();
        let mut sent_start = line_start;
        let mut i = line_start;
        while i < line_end {
            let b = bytes[i];
            if matches!(b, b'.' | b'?' | b'!') && !in_token(i) {
                let mut j = i + 1;
                while j < line_end && matches!(bytes[j], b')' | b']' | b'"' | b'\'') {
                    j += 1;
                }
                let rest = &text[j..line_end];
                let trimmed = rest.trim_start();
                let has_space = trimmed.len() < rest.len();
                let next_ok = trimmed
                    .chars()
                    .next()
                    .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit());
                if has_space && next_ok {
                    let word_start = text[sent_start..=i]
                        .rfind(|c: char| c.is_whitespace() || c == '(')
                        .map_or(sent_start, |p| sent_start + p + 1);
                    let protected = b == b'.' && is_abbreviation(&text[word_start..=i]);
                    if !protected {
                        push(sent_start, j);
                        sent_start = j;
                        i = j;
                        continue;
                    }
                }
            }
            i += 1;
        }
        push(sent_start, line_end);
        line_start = line_end + 1;
    }
    SentenceIndex { spans }
}
