//! Intent taxonomy, classifier input preparation, classification, dataset
//! splitting and scoring.

pub mod annotation;
mod baseline;
mod classify;
mod eval;
mod label;
mod split;
mod truncate;

pub use annotation::{export_annotations, import_annotations, to_labeling_tool_tasks, AnnotationItem, AnnotationRecord, ImportReport};
pub use baseline::{baseline_classify, keyword_label, BaselineClassifier, BASELINE_MODEL_ID};
pub use classify::{
    classify, classify_with_sleeper, ClassifierPlugin, ClassifyError, ClassifyOptions, Health, HttpClassifier, PredictRequest,
    PredictResponse, Prediction, PROB_SUM_TOLERANCE,
};
pub use eval::{evaluate, evaluate_labels, Averaging, ClassMetrics, EvalReport};
pub use label::{argmax, IntentLabel, NUM_LABELS};
pub use split::{split_by_group, split_dataset, split_items, DatasetSplit, SplitMode, SplitRatios};
pub use truncate::{kept_ranges, truncate, TokenSequence, TruncationMethod, DEFAULT_MAX_LEN};
