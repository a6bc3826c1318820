//! Publication-metadata enrichment through an external HTTP provider.
//!
//! Requests are batched, serialized through a rate limiter, retried with
//! exponential backoff on transient failures, and cached on disk per
//! document id so repeated runs do not hit the network.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DisciplineAssignment, Document};
use crate::error::{Error, Result};
use crate::http::{HttpFailure, JsonHttp};
pub use crate::retry::{RetryPolicy, Sleeper};

/// Environment variable holding the provider token.
pub const TOKEN_ENV: &str = "MINER_META_TOKEN";
pub const DEFAULT_BATCH_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub doc_id: String,
    pub pub_year: i32,
    pub disciplines: Vec<DisciplineAssignment>,
    pub citation_count: u64,
}

/// A discipline as returned by the provider; weights are optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDiscipline {
    #[serde(default)]
    pub code: String,
    pub name: String,
    #[serde(default)]
    pub weight: Option<f64>,
}

/// One provider record before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMetadata {
    pub doc_id: String,
    #[serde(default)]
    pub pub_year: Option<i32>,
    #[serde(default)]
    pub disciplines: Vec<RawDiscipline>,
    #[serde(default)]
    pub citation_count: Option<u64>,
}

impl RawMetadata {
    /// Validate and turn into a record. Disciplines without weights share the
    /// document uniformly; explicit weights are rescaled to sum to one.
    pub fn into_record(self, current_year: i32) -> std::result::Result<MetadataRecord, String> {
        let year = self.pub_year.ok_or("missing pub_year")?;
        if !(1800..=current_year + 1).contains(&year) {
            return Err(format!("pub_year {year} outside [1800, {}]", current_year + 1));
        }
        let mut seen: Vec<RawDiscipline> = Vec::new();
        for d in self.disciplines {
            if !d.name.trim().is_empty() && !seen.iter().any(|s| s.name == d.name) {
                seen.push(d);
            }
        }
        let explicit = !seen.is_empty()
            && seen
                .iter()
                .all(|d| d.weight.is_some_and(|w| w.is_finite() && w > 0.0));
        let total: f64 = if explicit {
            seen.iter().map(|d| d.weight.unwrap_or(0.0)).sum()
        } else {
            seen.len() as f64
        };
        let disciplines = seen
            .into_iter()
            .map(|d| {
                let w = if explicit { d.weight.unwrap_or(0.0) } else { 1.0 };
                DisciplineAssignment::new(d.code, d.name, w / total)
            })
            .collect();
        Ok(MetadataRecord {
            doc_id: self.doc_id,
            pub_year: year,
            disciplines,
            citation_count: self.citation_count.unwrap_or(0),
        })
    }
}

impl MetadataRecord {
    pub fn apply_to(&self, doc: &mut Document) {
        doc.pub_year = Some(self.pub_year);
        doc.disciplines = self.disciplines.clone();
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchError {
    /// Worth retrying: timeouts, 429, 5xx.
    Transient(String),
    /// Bad credentials; the whole run is misconfigured.
    Auth(String),
    /// The batch was rejected and retrying will not help.
    Rejected(String),
}

/// A metadata provider.
pub trait MetadataClient: Send + Sync {
    fn fetch(&self, ids: &[String]) -> std::result::Result<Vec<RawMetadata>, FetchError>;
}

#[derive(Serialize)]
struct FetchRequest<'a> {
    ids: &'a [String],
}

#[derive(Deserialize)]
struct FetchResponse {
    records: Vec<RawMetadata>,
}

/// Provider client speaking `POST <endpoint>` with `{"ids": [...]}` and a
/// bearer token, answering `{"records": [...]}`.
#[derive(Debug, Clone)]
pub struct HttpMetadataClient {
    http: JsonHttp,
    token: String,
}

impl HttpMetadataClient {
    pub fn new(endpoint: &str, token: impl Into<String>, timeout: Duration) -> Self {
        Self {
            http: JsonHttp::new(endpoint, timeout),
            token: token.into(),
        }
    }

    /// Token from [`TOKEN_ENV`].
    pub fn from_env(endpoint: &str, timeout: Duration) -> Result<Self> {
        let token = std::env::var(TOKEN_ENV)
            .map_err(|_| Error::Auth(format!("{TOKEN_ENV} is not set")))?;
        Ok(Self::new(endpoint, token, timeout))
    }
}

impl MetadataClient for HttpMetadataClient {
    fn fetch(&self, ids: &[String]) -> std::result::Result<Vec<RawMetadata>, FetchError> {
        match self
            .http
            .post::<_, FetchResponse>("", &FetchRequest { ids }, Some(&self.token))
        {
            Ok(resp) => Ok(resp.records),
            Err(HttpFailure::Status(401 | 403, body)) => Err(FetchError::Auth(body)),
            Err(HttpFailure::Status(code @ (408 | 429 | 500..=599), body)) => {
                Err(FetchError::Transient(format!("HTTP {code}: {body}")))
            }
            Err(HttpFailure::Transport(m)) => Err(FetchError::Transient(m)),
            Err(other) => Err(FetchError::Rejected(other.to_string())),
        }
    }
}

/// Spaces calls at least `min_interval` apart.
pub struct RateLimiter {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(min_interval: Duration) -> Self {
        Self {
            min_interval,
            last: Mutex::new(None),
        }
    }

    pub fn per_second(rate: f64) -> Self {
        if rate <= 0.0 || !rate.is_finite() {
            return Self::new(Duration::ZERO);
        }
        Self::new(Duration::from_secs_f64(1.0 / rate))
    }

    fn acquire(&self, sleep: &dyn Fn(Duration)) {
        let mut last = self.last.lock().expect("rate limiter poisoned");
        if let Some(prev) = *last {
            let elapsed = prev.elapsed();
            if elapsed < self.min_interval {
                sleep(self.min_interval - elapsed);
            }
        }
        *last = Some(Instant::now());
    }
}

/// On-disk cache of resolved records, one JSON file per document id.
///
/// Files are replaced atomically so concurrent readers never observe a
/// partial entry.
pub struct MetadataCache {
    dir: PathBuf,
    memo: RwLock<HashMap<String, MetadataRecord>>,
}

impl MetadataCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir,
            memo: RwLock::new(HashMap::new()),
        })
    }

    fn path_for(&self, doc_id: &str) -> PathBuf {
        let digest = hex::encode(Sha256::digest(doc_id.as_bytes()));
        self.dir.join(format!("{}.json", &digest[..32]))
    }

    pub fn get(&self, doc_id: &str) -> Option<MetadataRecord> {
        if let Some(r) = self.memo.read().expect("cache poisoned").get(doc_id) {
            return Some(r.clone());
        }
        let bytes = std::fs::read(self.path_for(doc_id)).ok()?;
        let record: MetadataRecord = serde_json::from_slice(&bytes).ok()?;
        if record.doc_id != doc_id {
            return None;
        }
        self.memo
            .write()
            .expect("cache poisoned")
            .insert(doc_id.to_string(), record.clone());
        Some(record)
    }

    pub fn put(&self, record: &MetadataRecord) -> Result<()> {
        let bytes = serde_json::to_vec(record)?;
        crate::fsutil::write_atomic(&self.path_for(&record.doc_id), &bytes)?;
        self.memo
            .write()
            .expect("cache poisoned")
            .insert(record.doc_id.clone(), record.clone());
        Ok(())
    }

    pub fn len(&self) -> usize {
        std::fs::read_dir(&self.dir)
            .map(|rd| {
                rd.flatten()
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unresolved {
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttemptLog {
    pub batch: usize,
    pub attempt: u32,
    /// `None` on success.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct EnrichOutcome {
    pub records: Vec<MetadataRecord>,
    pub unresolved: Vec<Unresolved>,
    pub attempts: Vec<AttemptLog>,
    pub cache_hits: usize,
    pub network_calls: usize,
}

/// A configured enrichment run: client, cache, batching, backoff and rate
/// limiting.
pub struct Enricher<C> {
    client: C,
    cache: Option<MetadataCache>,
    batch_size: usize,
    retry: RetryPolicy,
    limiter: RateLimiter,
    sleeper: Sleeper,
    current_year: i32,
}

impl<C: MetadataClient> Enricher<C> {
    pub fn new(client: C) -> Self {
        use chrono::Datelike;
        Self {
            client,
            cache: None,
            batch_size: DEFAULT_BATCH_SIZE,
            retry: RetryPolicy::default(),
            limiter: RateLimiter::new(Duration::ZERO),
            sleeper: Box::new(std::thread::sleep),
            current_year: chrono::Utc::now().year(),
        }
    }

    pub fn with_cache(mut self, cache: MetadataCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limit(mut self, limiter: RateLimiter) -> Self {
        self.limiter = limiter;
        self
    }

    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Box::new(sleeper);
        self
    }

    pub fn with_current_year(mut self, year: i32) -> Self {
        self.current_year = year;
        self
    }

    pub fn client(&self) -> &C {
        &self.client
    }

    pub fn cache(&self) -> Option<&MetadataCache> {
        self.cache.as_ref()
    }

    /// Resolve metadata for `ids`.
    ///
    /// Only an authentication failure aborts; any other failure leaves the
    /// affected ids in [`EnrichOutcome::unresolved`].
    pub fn enrich(&self, ids: &[String]) -> Result<EnrichOutcome> {
        let mut out = EnrichOutcome::default();
        let mut resolved: HashMap<String, MetadataRecord> = HashMap::new();
        let mut pending: Vec<String> = Vec::new();
        for id in ids {
            if resolved.contains_key(id) || pending.contains(id) {
                continue;
            }
            match self.cache.as_ref().and_then(|c| c.get(id)) {
                Some(rec) => {
                    out.cache_hits += 1;
                    resolved.insert(id.clone(), rec);
                }
                None => pending.push(id.clone()),
            }
        }

        let mut failed: HashMap<String, String> = HashMap::new();
        for (batch_no, batch) in pending.chunks(self.batch_size).enumerate() {
            match self.fetch_with_retry(batch_no, batch, &mut out)? {
                Ok(raws) => {
                    for raw in raws {
                        if !batch.contains(&raw.doc_id) {
                            continue;
                        }
                        let id = raw.doc_id.clone();
                        match raw.into_record(self.current_year) {
                            Ok(rec) => {
                                if let Some(cache) = &self.cache {
                                    cache.put(&rec)?;
                                }
                                resolved.insert(id, rec);
                            }
                            Err(reason) => {
                                failed.insert(id, reason);
                            }
                        }
                    }
                    for id in batch {
                        if !resolved.contains_key(id) {
                            failed
                                .entry(id.clone())
                                .or_insert_with(|| "not returned by provider".into());
                        }
                    }
                }
                Err(reason) => {
                    for id in batch {
                        failed.insert(id.clone(), reason.clone());
                    }
                }
            }
        }

        let mut seen = std::collections::HashSet::new();
        for id in ids {
            if !seen.insert(id) {
                continue;
            }
            if let Some(rec) = resolved.remove(id) {
                out.records.push(rec);
            } else if let Some(reason) = failed.remove(id) {
                out.unresolved.push(Unresolved {
                    doc_id: id.clone(),
                    reason,
                });
            }
        }
        Ok(out)
    }

    fn fetch_with_retry(
        &self,
        batch_no: usize,
        batch: &[String],
        out: &mut EnrichOutcome,
    ) -> Result<std::result::Result<Vec<RawMetadata>, String>> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            let delay = self.retry.delay_before(attempt);
            if !delay.is_zero() {
                (self.sleeper)(delay);
            }
            self.limiter.acquire(&*self.sleeper);
            out.network_calls += 1;
            let result = self.client.fetch(batch);
            out.attempts.push(AttemptLog {
                batch: batch_no,
                attempt,
                error: result.as_ref().err().map(|e| format!("{e:?}")),
            });
            match result {
                Ok(raws) => return Ok(Ok(raws)),
                Err(FetchError::Auth(m)) => return Err(Error::Auth(m)),
                Err(FetchError::Rejected(m)) => return Ok(Err(m)),
                Err(FetchError::Transient(m)) => {
                    tracing::warn!(batch = batch_no, attempt, error = %m, "metadata fetch failed");
                    if attempt >= self.retry.max_attempts {
                        return Ok(Err(format!("gave up after {attempt} attempts: {m}")));
                    }
                }
            }
        }
    }
}

/// Resolve metadata for `ids` with a configured enricher.
pub fn enrich_metadata<C: MetadataClient>(ids: &[String], enricher: &Enricher<C>) -> Result<EnrichOutcome> {
    enricher.enrich(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct Mock {
        calls: AtomicUsize,
        fail_first: usize,
        error: FetchError,
    }

    impl Mock {
        fn ok() -> Self {
            Self::failing(0, FetchError::Transient("down".into()))
        }

        fn failing(n: usize, error: FetchError) -> Self {
            Self {
                calls: AtomicUsize::new(0),
                fail_first: n,
                error,
            }
        }
    }

    impl MetadataClient for Mock {
        fn fetch(&self, ids: &[String]) -> std::result::Result<Vec<RawMetadata>, FetchError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                return Err(self.error.clone());
            }
            Ok(ids
                .iter()
                .map(|id| RawMetadata {
                    doc_id: id.clone(),
                    pub_year: Some(2015),
                    disciplines: vec![
                        RawDiscipline { code: "31".into(), name: "Biological Sciences".into(), weight: None },
                        RawDiscipline { code: "32".into(), name: "Biomedical and Clinical Sciences".into(), weight: None },
                        RawDiscipline { code: "41".into(), name: "Environmental Sciences".into(), weight: None },
                    ],
                    citation_count: Some(3),
                })
                .collect())
        }
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn quiet<C: MetadataClient>(client: C) -> Enricher<C> {
        Enricher::new(client).with_sleeper(|_| {})
    }

    #[test]
    fn resolves_and_caches() {
        let dir = tempfile::tempdir().unwrap();
        let enricher = quiet(Mock::ok()).with_cache(MetadataCache::open(dir.path()).unwrap());
        let out = enricher.enrich(&ids(&["a", "b"])).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(enricher.cache().unwrap().len(), 2);
        let w: f64 = out.records[0].disciplines.iter().map(|d| d.weight).sum();
        assert!((w - 1.0).abs() < 1e-9);
        assert!((out.records[0].disciplines[0].weight - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn second_request_is_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let enricher = quiet(Mock::ok()).with_cache(MetadataCache::open(dir.path()).unwrap());
        enricher.enrich(&ids(&["a", "b"])).unwrap();
        let before = enricher.client().calls.load(Ordering::SeqCst);
        let out = enricher.enrich(&ids(&["a", "b"])).unwrap();
        assert_eq!(enricher.client().calls.load(Ordering::SeqCst) - before, 0);
        assert_eq!(out.network_calls, 0);
        assert_eq!(out.cache_hits, 2);

        // a fresh process reading the same directory also hits
        let again = quiet(Mock::ok()).with_cache(MetadataCache::open(dir.path()).unwrap());
        let out = again.enrich(&ids(&["b", "a"])).unwrap();
        assert_eq!(out.network_calls, 0);
        assert_eq!(out.records[0].doc_id, "b");
    }

    #[test]
    fn retries_transient_failures_with_backoff() {
        let delays = Arc::new(Mutex::new(Vec::new()));
        let d = delays.clone();
        let enricher = Enricher::new(Mock::failing(2, FetchError::Transient("503".into())))
            .with_sleeper(move |dur| d.lock().unwrap().push(dur));
        let out = enricher.enrich(&ids(&["a"])).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.attempts.len(), 3);
        assert!(out.attempts[2].error.is_none());
        assert_eq!(*delays.lock().unwrap(), vec![Duration::from_secs(1), Duration::from_secs(2)]);
    }

    #[test]
    fn exhausted_retries_give_partial_result() {
        let enricher = quiet(Mock::failing(100, FetchError::Transient("503".into()))).with_batch_size(1);
        let out = enricher.enrich(&ids(&["a", "b"])).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.unresolved.len(), 2);
        assert_eq!(out.attempts.len(), 10);
        assert!(out.unresolved[0].reason.contains("5 attempts"));
    }

    #[test]
    fn auth_failure_is_fatal() {
        let enricher = quiet(Mock::failing(1, FetchError::Auth("bad token".into())));
        assert!(matches!(enricher.enrich(&ids(&["a"])), Err(Error::Auth(_))));
    }

    #[test]
    fn batches_by_configured_size() {
        let enricher = quiet(Mock::ok()).with_batch_size(2);
        let out = enricher.enrich(&ids(&["a", "b", "c", "d", "e"])).unwrap();
        assert_eq!(out.network_calls, 3);
        assert_eq!(out.records.len(), 5);
    }

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        let delays: Vec<u64> = (1..=5).map(|a| p.delay_before(a).as_secs()).collect();
        assert_eq!(delays, vec![0, 1, 2, 4, 8]);
    }

    #[test]
    fn record_validation() {
        let raw = RawMetadata {
            doc_id: "x".into(),
            pub_year: Some(1700),
            disciplines: vec![],
            citation_count: None,
        };
        assert!(raw.into_record(2024).is_err());
        let raw = RawMetadata {
            doc_id: "x".into(),
            pub_year: Some(2020),
            disciplines: vec![
                RawDiscipline { code: "a".into(), name: "A".into(), weight: Some(3.0) },
                RawDiscipline { code: "b".into(), name: "B".into(), weight: Some(1.0) },
            ],
            citation_count: None,
        };
        let rec = raw.into_record(2024).unwrap();
        assert_eq!(rec.disciplines[0].weight, 0.75);
        assert_eq!(rec.disciplines[1].weight, 0.25);
    }
}
