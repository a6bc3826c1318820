//! Routing context windows to a classifier and validating what comes back.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::label::{argmax, IntentLabel, NUM_LABELS};
use super::truncate::{TruncationMethod, DEFAULT_MAX_LEN};
use crate::context::ContextWindow;
use crate::error::{Error, Result};
use crate::http::{HttpFailure, JsonHttp};
use crate::retry::RetryPolicy;

/// Tolerance on the probability-row sum.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub context_id: String,
    pub label: IntentLabel,
    pub confidence: [f64; NUM_LABELS],
}

impl Prediction {
    /// Build a prediction from a probability row, checking it is a
    /// distribution. The label is the row's argmax.
    pub fn from_probs(context_id: impl Into<String>, probs: &[f64]) -> Result<Self> {
        let context_id = context_id.into();
        let protocol = |message: String| Error::Protocol {
            context_id: context_id.clone(),
            message,
        };
        let row: [f64; NUM_LABELS] = probs
            .try_into()
            .map_err(|_| protocol(format!("expected {NUM_LABELS} probabilities, got {}", probs.len())))?;
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(protocol(format!("probabilities must be finite and non-negative: {row:?}")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(protocol(format!("probabilities sum to {sum}")));
        }
        Ok(Self {
            label: argmax(&row),
            context_id,
            confidence: row,
        })
    }

    pub fn certain(context_id: impl Into<String>, label: IntentLabel) -> Self {
        let mut confidence = [0.0; NUM_LABELS];
        confidence[label.index()] = 1.0;
        Self {
            context_id: context_id.into(),
            label,
            confidence,
        }
    }
}

/// `POST /predict` request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub texts: Vec<String>,
    pub truncation: TruncationMethod,
    pub max_len: usize,
}

/// `POST /predict` response body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub labels: Vec<i64>,
    pub probs: Vec<Vec<f64>>,
}

/// `GET /health` response body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    #[serde(default)]
    pub model_id: Option<String>,
}

impl Health {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Anything that can label a batch of texts.
///
/// Implementations return [`Error::Unavailable`] for failures worth
/// retrying; every other error fails the batch immediately.
pub trait ClassifierPlugin: Send + Sync {
    fn health(&self) -> Result<Health>;
    fn predict(&self, request: &PredictRequest) -> Result<PredictResponse>;
}

impl<P: ClassifierPlugin + ?Sized> ClassifierPlugin for &P {
    fn health(&self) -> Result<Health> {
        (**self).health()
    }

    fn predict(&self, request: &PredictRequest) -> Result<PredictResponse> {
        (**self).predict(request)
    }
}

impl<P: ClassifierPlugin + ?Sized> ClassifierPlugin for Box<P> {
    fn health(&self) -> Result<Health> {
        (**self).health()
    }

    fn predict(&self, request: &PredictRequest) -> Result<PredictResponse> {
        (**self).predict(request)
    }
}

/// Client for a model service speaking the JSON prediction protocol.
#[derive(Debug, Clone)]
pub struct HttpClassifier {
    http: JsonHttp,
}

impl HttpClassifier {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        Self {
            http: JsonHttp::new(endpoint, timeout),
        }
    }
}

fn service_error(f: HttpFailure) -> Error {
    match f {
        HttpFailure::Transport(_) | HttpFailure::Status(429 | 500..=599, _) => Error::Unavailable(f.to_string()),
        other => Error::Protocol {
            context_id: "<batch>".into(),
            message: other.to_string(),
        },
    }
}

impl ClassifierPlugin for HttpClassifier {
    fn health(&self) -> Result<Health> {
        self.http.get("health").map_err(service_error)
    }

    fn predict(&self, request: &PredictRequest) -> Result<PredictResponse> {
        self.http.post("predict", request, None).map_err(service_error)
    }
}

#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    pub batch_size: usize,
    pub truncation: TruncationMethod,
    pub max_len: usize,
    /// Batches in flight at once.
    pub concurrency: usize,
    pub retry: RetryPolicy,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            batch_size: 64,
            truncation: TruncationMethod::Tail,
            max_len: DEFAULT_MAX_LEN,
            concurrency: 1,
            retry: RetryPolicy {
                base: Duration::from_millis(500),
                factor: 2.0,
                max_attempts: 3,
            },
        }
    }
}

/// A failed classification run. `completed` holds the predictions for the
/// contiguous prefix of contexts that finished before the failing batch, so
/// a caller can checkpoint them and resume.
#[derive(Debug, thiserror::Error)]
#[error("batch {failed_batch} failed after {} completed predictions: {source}", completed.len())]
pub struct ClassifyError {
    pub completed: Vec<Prediction>,
    pub failed_batch: usize,
    #[source]
    pub source: Error,
}

fn check_response(batch: &[ContextWindow], resp: PredictResponse) -> Result<Vec<Prediction>> {
    let first = || batch.first().map_or_else(String::new, |c| c.context_id.clone());
    if resp.probs.len() != batch.len() || resp.labels.len() != batch.len() {
        return Err(Error::Protocol {
            context_id: first(),
            message: format!(
                "sent {} texts, got {} labels and {} probability rows",
                batch.len(),
                resp.labels.len(),
                resp.probs.len()
            ),
        });
    }
    batch
        .iter()
        .zip(resp.labels)
        .zip(resp.probs)
        .map(|((ctx, label), probs)| {
            let pred = Prediction::from_probs(ctx.context_id.clone(), &probs)?;
            if label != pred.label as i64 {
                return Err(Error::Protocol {
                    context_id: ctx.context_id.clone(),
                    message: format!("label {label} is not the argmax {} of {probs:?}", pred.label as i64),
                });
            }
            Ok(pred)
        })
        .collect()
}

fn run_batch<P: ClassifierPlugin + ?Sized>(
    plugin: &P,
    batch: &[ContextWindow],
    opts: &ClassifyOptions,
    sleep: &(dyn Fn(Duration) + Sync),
) -> Result<Vec<Prediction>> {
    let request = PredictRequest {
        texts: batch.iter().map(|c| c.text.clone()).collect(),
        truncation: opts.truncation,
        max_len: opts.max_len,
    };
    let mut attempt = 0;
    loop {
        attempt += 1;
        let delay = opts.retry.delay_before(attempt);
        if !delay.is_zero() {
            sleep(delay);
        }
        match plugin.predict(&request) {
            Ok(resp) => return check_response(batch, resp),
            Err(Error::Unavailable(m)) if attempt < opts.retry.max_attempts => {
                tracing::warn!(attempt, error = %m, "classifier unavailable, retrying");
            }
            Err(e) => return Err(e),
        }
    }
}

/// Label every context, preserving input order.
pub fn classify<P: ClassifierPlugin + ?Sized>(
    contexts: &[ContextWindow],
    plugin: &P,
    opts: &ClassifyOptions,
) -> std::result::Result<Vec<Prediction>, ClassifyError> {
    classify_with_sleeper(contexts, plugin, opts, &std::thread::sleep)
}

pub fn classify_with_sleeper<P: ClassifierPlugin + ?Sized>(
    contexts: &[ContextWindow],
    plugin: &P,
    opts: &ClassifyOptions,
    sleep: &(dyn Fn(Duration) + Sync),
) -> std::result::Result<Vec<Prediction>, ClassifyError> {
    let fail = |failed_batch, completed, source| ClassifyError {
        completed,
        failed_batch,
        source,
    };
    match plugin.health() {
        Ok(h) if h.is_ok() => {}
        Ok(h) => return Err(fail(0, Vec::new(), Error::Unavailable(format!("classifier status {:?}", h.status)))),
        Err(e) => return Err(fail(0, Vec::new(), e)),
    }

    let batches: Vec<&[ContextWindow]> = contexts.chunks(opts.batch_size.max(1)).collect();
    let results: Vec<Mutex<Option<Result<Vec<Prediction>>>>> = batches.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let failed = AtomicUsize::new(usize::MAX);
    let workers = opts.concurrency.clamp(1, batches.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= batches.len() || i > failed.load(Ordering::SeqCst) {
                    break;
                }
                let r = run_batch(plugin, batches[i], opts, sleep);
                if r.is_err() {
                    failed.fetch_min(i, Ordering::SeqCst);
                }
                *results[i].lock().expect("result slot poisoned") = Some(r);
            });
        }
    });

    let mut out = Vec::with_capacity(contexts.len());
    for (i, slot) in results.into_iter().enumerate() {
        match slot.into_inner().expect("result slot poisoned") {
            Some(Ok(preds)) => out.extend(preds),
            Some(Err(e)) => return Err(fail(i, out, e)),
            None => unreachable!("batch {i} skipped without an earlier failure"),
        }
    }
    Ok(out)
}
