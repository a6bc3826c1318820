//! Keyword-rule classifier that stands in for the model service.

use super::classify::{ClassifierPlugin, Health, PredictRequest, PredictResponse, Prediction};
use super::label::IntentLabel;
use super::truncate::{TokenSequence, TruncationMethod, DEFAULT_MAX_LEN};
use crate::context::ContextWindow;
use crate::error::Result;

pub const BASELINE_MODEL_ID: &str = "baseline-keywords-v1";

/// Submission-system boilerplate; any hit means the link is not a data mention.
const NOTHING_CUES: &[&str] = &[
    "upload your files",
    "will take you to",
    "re-enter its bibliographic",
    "submit?journalid",
    "instructions for authors",
    "more information about depositing",
];

const RELEASE_CUES: &[&str] = &[
    "deposit",
    "deposited",
    "available at",
    "accession",
    "accession number",
    "released",
    "accessed through",
    "can be accessed",
    "have been made available",
    "has been made available",
    "uploaded to",
    "submitted to",
];

const REUSE_CUES: &[&str] = &[
    "downloaded from",
    "download from",
    "obtained from",
    "we used",
    "retrieved from",
    "data used",
    "were used",
    "was used",
    "extracted from",
    "acquired from",
];

const REFERENCE_CUES: &[&str] = &[
    "see",
    "listed in",
    "cross-referenced",
    "e.g.",
    "for example",
    "reviewed in",
    "compared with",
    "we also list",
    "has been confirmed",
];

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric()
}

/// Whether `cue` occurs in `text` as a whole word or phrase.
fn contains_phrase(text: &str, cue: &str) -> bool {
    let bytes = text.as_bytes();
    text.match_indices(cue).any(|(i, _)| {
        let end = i + cue.len();
        let left_ok = i == 0 || !is_word_byte(bytes[i - 1]) || !is_word_byte(cue.as_bytes()[0]);
        let right_ok = end == bytes.len() || !is_word_byte(bytes[end]) || !is_word_byte(cue.as_bytes()[cue.len() - 1]);
        left_ok && right_ok
    })
}

fn hits(text: &str, cues: &[&str]) -> usize {
    cues.iter().filter(|c| contains_phrase(text, c)).count()
}

/// Label a (lowercased or not) text with the keyword rules.
///
/// Boilerplate cues force `Nothing`. Otherwise the label with most distinct
/// cue hits wins, ties going to the lower label; with no hits at all the
/// majority class `Release` is returned.
pub fn keyword_label(text: &str) -> IntentLabel {
    let lower = text.to_lowercase();
    if hits(&lower, NOTHING_CUES) > 0 {
        return IntentLabel::Nothing;
    }
    let scores = [
        hits(&lower, RELEASE_CUES),
        hits(&lower, REUSE_CUES),
        hits(&lower, REFERENCE_CUES),
    ];
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    IntentLabel::SUBSTANTIVE[best]
}

/// Classify one window: whitespace tokens, tail truncation to 512, keyword
/// rules, full confidence on the chosen label.
pub fn baseline_classify(context: &ContextWindow) -> Prediction {
    let text = TokenSequence::whitespace(&context.text)
        .truncated(DEFAULT_MAX_LEN, TruncationMethod::Tail)
        .join();
    Prediction::certain(context.context_id.clone(), keyword_label(&text))
}

/// [`keyword_label`] behind the plugin interface.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineClassifier;

impl ClassifierPlugin for BaselineClassifier {
    fn health(&self) -> Result<Health> {
        Ok(Health {
            status: "ok".into(),
            model_id: Some(BASELINE_MODEL_ID.into()),
        })
    }

    fn predict(&self, request: &PredictRequest) -> Result<PredictResponse> {
        let mut labels = Vec::with_capacity(request.texts.len());
        let mut probs = Vec::with_capacity(request.texts.len());
        for text in &request.texts {
            let text = TokenSequence::whitespace(text)
                .truncated(request.max_len, request.truncation)
                .join();
            let pred = Prediction::certain("", keyword_label(&text));
            labels.push(pred.label as i64);
            probs.push(pred.confidence.to_vec());
        }
        Ok(PredictResponse { labels, probs })
    }
}
