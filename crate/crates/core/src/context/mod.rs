//! Sentence segmentation and mention context windows.

mod segment;
mod window;

pub use segment::{segment_sentences, segment_text, SentenceIndex};
pub use window::{context_id, extract_contexts, window_bounds, ContextWindow, WINDOW_RADIUS};
