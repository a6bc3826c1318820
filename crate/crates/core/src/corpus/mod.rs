//! The corpus unit and its loaders.

mod jats;
mod jsonl;
pub mod metadata;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use jats::{parse_jats, parse_jats_file, parse_jats_with_diagnostics, JatsDiagnostics};
pub use jsonl::{load_jsonl, write_jsonl, DocumentStream, LineDiagnostic, LoadMode};

/// License partition of the open-access collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LicenseClass {
    Comm,
    Noncomm,
    #[default]
    Other,
}

impl LicenseClass {
    /// License class from a collection directory such as `oa_comm/`.
    pub fn from_path(path: &Path) -> Self {
        for component in path.components().rev() {
            let name = component.as_os_str().to_string_lossy().to_ascii_lowercase();
            let name = name.strip_prefix("oa_").unwrap_or(&name);
            match name {
                "noncomm" => return LicenseClass::Noncomm,
                "comm" => return LicenseClass::Comm,
                "other" => return LicenseClass::Other,
                _ => {}
            }
        }
        LicenseClass::Other
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LicenseClass::Comm => "comm",
            LicenseClass::Noncomm => "noncomm",
            LicenseClass::Other => "other",
        }
    }
}

impl fmt::Display for LicenseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LicenseClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().trim_start_matches("oa_") {
            "comm" => Ok(LicenseClass::Comm),
            "noncomm" => Ok(LicenseClass::Noncomm),
            "other" => Ok(LicenseClass::Other),
            other => Err(Error::Invalid(format!("unknown license class {other:?}"))),
        }
    }
}

/// One discipline of a document with its fractional-counting weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisciplineAssignment {
    pub code: String,
    pub name: String,
    pub weight: f64,
}

impl DisciplineAssignment {
    pub fn new(code: impl Into<String>, name: impl Into<String>, weight: f64) -> Self {
        Self {
            code: code.into(),
            name: name.into(),
            weight,
        }
    }
}

/// Build assignments for `k` disciplines, giving each `1/k` weight.
pub fn uniform_assignments<I, C, N>(disciplines: I) -> Vec<DisciplineAssignment>
where
    I: IntoIterator<Item = (C, N)>,
    C: Into<String>,
    N: Into<String>,
{
    let mut out: Vec<DisciplineAssignment> = Vec::new();
    for (code, name) in disciplines {
        let name = name.into();
        if out.iter().any(|d| d.name == name) {
            continue;
        }
        out.push(DisciplineAssignment::new(code, name, 0.0));
    }
    let k = out.len() as f64;
    for d in &mut out {
        d.weight = 1.0 / k;
    }
    out
}

/// A full-text article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub body_text: String,
    #[serde(default)]
    pub pub_year: Option<i32>,
    #[serde(default)]
    pub disciplines: Vec<DisciplineAssignment>,
    #[serde(default)]
    pub license_class: LicenseClass,
    #[serde(default)]
    pub source_path: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, body_text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            title: String::new(),
            body_text: body_text.into(),
            pub_year: None,
            disciplines: Vec::new(),
            license_class: LicenseClass::Other,
            source_path: String::new(),
        }
    }

    /// Check the document-level invariants.
    pub fn validate(&self) -> Result<()> {
        if self.doc_id.trim().is_empty() {
            return Err(Error::Invalid("doc_id must be non-empty".into()));
        }
        for (i, d) in self.disciplines.iter().enumerate() {
            if self.disciplines[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::Invalid(format!(
                    "{}: duplicate discipline {:?}",
                    self.doc_id, d.name
                )));
            }
            if !(d.weight > 0.0 && d.weight <= 1.0) {
                return Err(Error::Invalid(format!(
                    "{}: discipline {:?} has weight {} outside (0, 1]",
                    self.doc_id, d.name, d.weight
                )));
            }
        }
        if !self.disciplines.is_empty() {
            let total: f64 = self.disciplines.iter().map(|d| d.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Invalid(format!(
                    "{}: discipline weights sum to {total}",
                    self.doc_id
                )));
            }
        }
        Ok(())
    }
}
