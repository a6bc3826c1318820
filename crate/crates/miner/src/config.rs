//! Pipeline configuration: a versioned TOML file whose values can be
//! overridden by `MINER_`-prefixed environment variables.
//!
//! An override names a key path with `__` between levels, e.g.
//! `MINER_SEED=7` or `MINER_CLASSIFIER__MODE=service`. Values are read as TOML
//! literals when they parse as one and as plain strings otherwise.

use std::path::{Path, PathBuf};

use miner_core::analytics::{
    DenominatorMode, DisciplineOptions, NetworkOptions, PairWeight, Qualification, DEFAULT_MIN_SUPPORT, DEFAULT_TOP_REPOS,
    DEFAULT_TOP_REPO_INTENTS,
};
use miner_core::intent::{Averaging, SplitRatios, TruncationMethod, DEFAULT_MAX_LEN};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CONFIG_VERSION: u32 = 1;
pub const ENV_PREFIX: &str = "MINER_";
/// Environment variables with the prefix that are not config overrides.
const RESERVED_ENV: &[&str] = &["MINER_META_TOKEN", "MINER_LOG"];

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub run_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub metadata: Option<MetadataConfig>,
    pub registry: RegistryConfig,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub annotations: AnnotationConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub analytics: AnalyticsConfig,
    #[serde(default)]
    pub export: ExportConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    /// JSONL files, or directories searched for `.xml`/`.nxml` JATS files.
    pub paths: Vec<PathBuf>,
    #[serde(default)]
    pub lenient: bool,
    /// Allowed discipline names. Empty accepts any name.
    #[serde(default)]
    pub vocabulary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadataConfig {
    pub endpoint: String,
    /// Falls back to `MINER_META_TOKEN`.
    #[serde(default, skip_serializing)]
    pub token: Option<String>,
    #[serde(default = "default_meta_batch")]
    pub batch_size: usize,
    #[serde(default = "default_rate")]
    pub rate_per_second: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryConfig {
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierMode {
    #[default]
    Baseline,
    Service,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub mode: ClassifierMode,
    pub endpoint: Option<String>,
    pub truncation: TruncationMethod,
    pub max_len: usize,
    pub batch_size: usize,
    pub concurrency: usize,
    pub timeout_secs: u64,
    /// Batches between checkpoints of the predict stage.
    pub checkpoint_every: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            mode: ClassifierMode::Baseline,
            endpoint: None,
            truncation: TruncationMethod::Tail,
            max_len: DEFAULT_MAX_LEN,
            batch_size: 64,
            concurrency: 1,
            timeout_secs: default_timeout(),
            checkpoint_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    /// Articles to draw for annotation.
    pub size: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { size: 1000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotationConfig {
    /// Labelled annotations to import, native or labeling-tool JSON.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitStrategy {
    #[default]
    Stratified,
    Unstratified,
    /// Keep all contexts of one article in the same part.
    Grouped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub ratios: SplitRatios,
    pub split: SplitStrategy,
    pub averaging: Averaging,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            ratios: SplitRatios::default(),
            split: SplitStrategy::Stratified,
            averaging: Averaging::Weighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticsConfig {
    pub include_nothing: bool,
    pub denominator: DenominatorMode,
    pub pair_weight: PairWeight,
    pub qualification: Qualification,
    pub min_support: usize,
    pub top_repos: usize,
    pub top_repo_intents: usize,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        Self {
            include_nothing: false,
            denominator: DenominatorMode::Context,
            pair_weight: PairWeight::InverseBinomial,
            qualification: Qualification::OncePerDocument,
            min_support: DEFAULT_MIN_SUPPORT,
            top_repos: DEFAULT_TOP_REPOS,
            top_repo_intents: DEFAULT_TOP_REPO_INTENTS,
        }
    }
}

impl AnalyticsConfig {
    pub fn discipline_options(&self) -> DisciplineOptions {
        DisciplineOptions {
            include_nothing: self.include_nothing,
            mode: self.denominator,
        }
    }

    pub fn network_options(&self) -> NetworkOptions {
        NetworkOptions {
            pair_weight: self.pair_weight,
            qualification: self.qualification,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportConfig {
    /// Defaults to `<run_dir>/export`.
    pub dir: Option<PathBuf>,
}

fn default_meta_batch() -> usize {
    miner_core::corpus::metadata::DEFAULT_BATCH_SIZE
}

fn default_rate() -> f64 {
    10.0
}

fn default_timeout() -> u64 {
    30
}

fn env_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply `MINER_*` overrides to a parsed config table.
pub fn apply_overrides<I, K, V>(table: &mut toml::Table, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    for (key, value) in vars {
        let key = key.as_ref();
        let Some(rest) = key.strip_prefix(ENV_PREFIX) else { continue };
        if RESERVED_ENV.contains(&key) || rest.is_empty() {
            continue;
        }
        let path: Vec<String> = rest.split("__").map(str::to_ascii_lowercase).collect();
        let mut cur = &mut *table;
        for part in &path[..path.len() - 1] {
            let entry = cur
                .entry(part.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry
                .as_table_mut()
                .ok_or_else(|| ConfigError(format!("{key}: `{part}` is not a section")))?;
        }
        cur.insert(path[path.len() - 1].clone(), env_value(value.as_ref()));
    }
    Ok(())
}

fn absolutize(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    /// Read a config file, apply environment overrides, resolve relative
    /// paths against the file's directory and validate.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env<I, K, V>(path: &Path, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, vars)
    }

    pub fn parse<I, K, V>(text: &str, base: &Path, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut table: toml::Table = text.parse().map_err(|e| ConfigError(format!("invalid config: {e}")))?;
        apply_overrides(&mut table, vars)?;
        let mut cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError(format!("invalid config: {}", e.message())))?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in &mut self.corpus.paths {
            absolutize(base, p);
        }
        absolutize(base, &mut self.registry.path);
        self.run_dir.get_or_insert_with(|| PathBuf::from("run"));
        for p in [&mut self.run_dir, &mut self.annotations.path, &mut self.export.dir].into_iter().flatten() {
            absolutize(base, p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(ConfigError(m));
        if self.version != CONFIG_VERSION {
            return err(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.corpus.paths.is_empty() {
            return err("corpus.paths is empty".into());
        }
        let mut paths: Vec<&PathBuf> = self.corpus.paths.iter().collect();
        paths.push(&self.registry.path);
        paths.extend(&self.annotations.path);
        for p in paths {
            if !p.exists() {
                return err(format!("path does not exist: {}", p.display()));
            }
        }
        let c = &self.classifier;
        if c.mode == ClassifierMode::Service && c.endpoint.is_none() {
            return err("classifier.mode = \"service\" needs classifier.endpoint".into());
        }
        if c.batch_size == 0 || c.concurrency == 0 || c.checkpoint_every == 0 || c.max_len == 0 {
            return err("classifier batch_size, concurrency, checkpoint_every and max_len must be positive".into());
        }
        if let Some(m) = &self.metadata {
            if m.batch_size == 0 || m.rate_per_second.is_nan() || m.rate_per_second <= 0.0 {
                return err("metadata batch_size and rate_per_second must be positive".into());
            }
        }
        if self.sample.size == 0 {
            return err("sample.size must be positive".into());
        }
        if self.workers == Some(0) {
            return err("workers must be positive".into());
        }
        if self.analytics.top_repos == 0 || self.analytics.top_repo_intents == 0 {
            return err("analytics top_repos and top_repo_intents must be positive".into());
        }
        self.evaluate.ratios.validate().map_err(|e| ConfigError(e.to_string()))
    }

    /// Digest of the resolved configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Defaults to `run/` next to the config file.
    pub fn run_dir(&self) -> PathBuf {
        self.run_dir.clone().unwrap_or_else(|| PathBuf::from("run"))
    }
}
