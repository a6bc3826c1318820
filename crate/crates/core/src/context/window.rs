use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SentenceIndex;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::registry::Mention;

/// Sentences kept on each side of the core sentence.
pub const WINDOW_RADIUS: usize = 2;

/// The text around one repository mention: the core sentence plus up to two
/// sentences on either side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    pub context_id: String,
    pub doc_id: String,
    pub repo_id: String,
    pub core_index: usize,
    pub window_start: usize,
    pub window_end: usize,
    /// Byte span of the window in the original body text.
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub mention_count: usize,
}

/// Stable id derived from the document, the window's sentence range and the
/// repository.
pub fn context_id(doc_id: &str, window_start: usize, window_end: usize, repo_id: &str) -> String {
    let mut h = Sha256::new();
    h.update(doc_id.as_bytes());
    h.update([0]);
    h.update(window_start.to_string().as_bytes());
    h.update([0]);
    h.update(window_end.to_string().as_bytes());
    h.update([0]);
    h.update(repo_id.as_bytes());
    hex::encode(h.finalize())[..16].to_string()
}

/// Inclusive window bounds around `core` in a document of `count` sentences.
pub fn window_bounds(core: usize, count: usize) -> (usize, usize) {
    (core.saturating_sub(WINDOW_RADIUS), (core + WINDOW_RADIUS).min(count - 1))
}

/// Cut one window per mention, merging mentions of the same repository whose
/// windows coincide. Output follows first-mention order.
pub fn extract_contexts(doc: &Document, mentions: &[Mention], index: &SentenceIndex) -> Result<Vec<ContextWindow>> {
    let body = doc.body_text.as_str();
    let mut out: Vec<ContextWindow> = Vec::new();
    for m in mentions {
        let core = index.sentence_at(m.start).ok_or_else(|| Error::Consistency {
            doc_id: doc.doc_id.clone(),
            offset: m.start,
        })?;
        let (ws, we) = window_bounds(core, index.len());
        if let Some(existing) = out
            .iter_mut()
            .find(|c| c.repo_id == m.repo_id && c.window_start == ws && c.window_end == we)
        {
            existing.mention_count += 1;
            continue;
        }
        let text = (ws..=we)
            .map(|i| index.text(body, i))
            .collect::<Vec<_>>()
            .join(" ");
        out.push(ContextWindow {
            context_id: context_id(&doc.doc_id, ws, we, &m.repo_id),
            doc_id: doc.doc_id.clone(),
            repo_id: m.repo_id.clone(),
            core_index: core,
            window_start: ws,
            window_end: we,
            start: index.spans[ws].0,
            end: index.spans[we].1,
            text,
            mention_count: 1,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::segment_text;

    fn mention_at(body: &str, needle: &str, nth: usize, repo: &str) -> Mention {
        let start = body.match_indices(needle).nth(nth).unwrap().0;
        Mention {
            doc_id: "d".into(),
            repo_id: repo.into(),
            start,
            end: start + needle.len(),
            matched_text: needle.into(),
            normalized_url: needle.into(),
        }
    }

    fn ten_sentences() -> String {
        (0..10).map(|i| format!("Sentence {i} mentions S{i}.")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn middle_window_spans_five() {
        let body = ten_sentences();
        let doc = Document::new("d", body.clone());
        let idx = segment_text(&body);
        assert_eq!(idx.len(), 10);
        let ctx = extract_contexts(&doc, &[mention_at(&body, "S5", 0, "r")], &idx).unwrap();
        assert_eq!((ctx[0].core_index, ctx[0].window_start, ctx[0].window_end), (5, 3, 7));
        assert_eq!(ctx[0].text, "Sentence 3 mentions S3. Sentence 4 mentions S4. Sentence 5 mentions S5. Sentence 6 mentions S6. Sentence 7 mentions S7.");
        assert_eq!(&body[ctx[0].start..ctx[0].end], ctx[0].text);
    }

    #[test]
    fn clamped_at_start() {
        let body = "First has zenodo.org/x here. Second.";
        let idx = segment_text(body);
        let ctx = extract_contexts(&Document::new("d", body), &[mention_at(body, "zenodo.org/x", 0, "z")], &idx).unwrap();
        assert_eq!((ctx[0].window_start, ctx[0].window_end), (0, 1));
    }

    #[test]
    fn same_repo_same_sentence_merges() {
        let body = "A. Both zenodo.org/a and zenodo.org/b here. C.";
        let idx = segment_text(body);
        let ms = vec![mention_at(body, "zenodo.org/a", 0, "z"), mention_at(body, "zenodo.org/b", 0, "z")];
        let ctx = extract_contexts(&Document::new("d", body), &ms, &idx).unwrap();
        assert_eq!(ctx.len(), 1);
        assert_eq!(ctx[0].mention_count, 2);
    }

    #[test]
    fn different_repos_never_merge() {
        let body = "A. Both zenodo.org/a and figshare.com/b here. C.";
        let idx = segment_text(body);
        let ms = vec![mention_at(body, "zenodo.org/a", 0, "z"), mention_at(body, "figshare.com/b", 0, "f")];
        let ctx = extract_contexts(&Document::new("d", body), &ms, &idx).unwrap();
        assert_eq!(ctx.len(), 2);
        assert_eq!(ctx[0].text, ctx[1].text);
        assert_ne!(ctx[0].context_id, ctx[1].context_id);
    }

    #[test]
    fn uncovered_offset_is_consistency_error() {
        let body = "One. Two.";
        let idx = segment_text(body);
        let mut m = mention_at(body, "One", 0, "r");
        m.start = 4;
        assert!(matches!(
            extract_contexts(&Document::new("d", body), &[m], &idx),
            Err(Error::Consistency { offset: 4, .. })
        ));
    }

    #[test]
    fn ids_are_stable() {
        assert_eq!(context_id("d", 0, 4, "z"), context_id("d", 0, 4, "z"));
        assert_ne!(context_id("d", 0, 4, "z"), context_id("d", 1, 4, "z"));
        assert_eq!(context_id("d", 0, 4, "z").len(), 16);
    }
}
