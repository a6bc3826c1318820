//! URL tokens and URL normalization.
//!
//! A URL token is a maximal run of URL characters with surrounding prose
//! punctuation trimmed. Normalization lowercases, drops the scheme and a
//! leading `www.` label, and strips a trailing slash.

const SCHEMES: [&str; 3] = ["http://", "https://", "ftp://"];

/// Characters allowed inside a URL token.
#[inline]
pub fn is_url_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric()
        || matches!(
            b,
            b'.' | b'_'
                | b'~'
                | b':'
                | b'/'
                | b'?'
                | b'#'
                | b'['
                | b']'
                | b'@'
                | b'!'
                | b'$'
                | b'&'
                | b'\''
                | b'('
                | b')'
                | b'*'
                | b'+'
                | b','
                | b';'
                | b'='
                | b'%'
                | b'-'
        )
}

#[inline]
fn is_trailing_punct(b: u8) -> bool {
    matches!(b, b'.' | b',' | b';' | b')' | b']' | b'\'' | b'"')
}

/// Byte spans of URL tokens in `text`, in increasing order.
pub fn url_tokens(text: &str) -> UrlTokens<'_> {
    UrlTokens {
        bytes: text.as_bytes(),
        pos: 0,
    }
}

pub struct UrlTokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Iterator for UrlTokens<'_> {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<(usize, usize)> {
        let bytes = self.bytes;
        loop {
            while self.pos < bytes.len() && !is_url_byte(bytes[self.pos]) {
                self.pos += 1;
            }
            if self.pos >= bytes.len() {
                return None;
            }
            let run_start = self.pos;
            while self.pos < bytes.len() && is_url_byte(bytes[self.pos]) {
                self.pos += 1;
            }
            if let Some(span) = trim_token(bytes, run_start, self.pos) {
                return Some(span);
            }
        }
    }
}

fn trim_token(bytes: &[u8], mut start: usize, mut end: usize) -> Option<(usize, usize)> {
    while end > start && is_trailing_punct(bytes[end - 1]) {
        end -= 1;
    }
    while start < end && !bytes[start].is_ascii_alphanumeric() {
        start += 1;
    }
    if start >= end {
        return None;
    }
    // "at:http://host" or "EVA:https://host" begins at the scheme.
    if let Some(rel) = find(&bytes[start..end], b"://") {
        let mut scheme_start = start + rel;
        while scheme_start > start && bytes[scheme_start - 1].is_ascii_alphabetic() {
            scheme_start -= 1;
        }
        if scheme_start < start + rel {
            start = scheme_start;
        }
    }
    Some((start, end))
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Span of the normalized URL inside an already lowercased, trimmed token.
///
/// Scheme and `www.` prefixes are removed until none remain, then trailing
/// slashes, so the result is a fixpoint of normalization.
pub(crate) fn normalized_span(lower: &[u8]) -> (usize, usize) {
    let mut start = 0;
    'strip: loop {
        let rest = &lower[start..];
        for scheme in SCHEMES {
            if rest.starts_with(scheme.as_bytes()) {
                start += scheme.len();
                continue 'strip;
            }
        }
        if rest.starts_with(b"www.") {
            start += 4;
            continue;
        }
        break;
    }
    let mut end = lower.len();
    while end > start && lower[end - 1] == b'/' {
        end -= 1;
    }
    (start, end)
}

/// Normalize a URL for matching against registry patterns.
///
/// ```
/// use miner_core::registry::normalize_url;
/// assert_eq!(
///     normalize_url("https://meertens.knaw.nl/en/collections/"),
///     "meertens.knaw.nl/en/collections"
/// );
/// ```
pub fn normalize_url(url: &str) -> String {
    let lower = url.trim().to_lowercase();
    let (start, end) = normalized_span(lower.as_bytes());
    lower[start..end].to_string()
}

/// Whether `pattern` may end at `end` inside `normalized` without cutting a
/// host label or path segment in half.
#[inline]
pub(crate) fn at_boundary(pattern: &[u8], normalized: &[u8], end: usize) -> bool {
    if end == normalized.len() {
        return true;
    }
    match pattern.last() {
        Some(b) if !b.is_ascii_alphanumeric() => true,
        _ => matches!(normalized[end], b'/' | b'?' | b'#' | b':'),
    }
}

/// Whether `pattern` is a boundary-respecting prefix of the normalized URL.
pub fn pattern_matches(pattern: &str, normalized: &str) -> bool {
    normalized.starts_with(pattern)
        && !pattern.is_empty()
        && at_boundary(pattern.as_bytes(), normalized.as_bytes(), pattern.len())
}
