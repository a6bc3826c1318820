use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    #[default]
    Strict,
    Lenient,
}

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineDiagnostic {
    pub line: usize,
    pub message: String,
}

/// Lazily parsed documents from a JSONL corpus file.
///
/// In strict mode the first invalid line is yielded as an error and the
/// stream ends. In lenient mode invalid lines are skipped and recorded.
pub struct DocumentStream {
    path: PathBuf,
    lines: std::io::Lines<BufReader<File>>,
    line_no: usize,
    mode: LoadMode,
    diagnostics: Vec<LineDiagnostic>,
    done: bool,
}

impl DocumentStream {
    pub fn diagnostics(&self) -> &[LineDiagnostic] {
        &self.diagnostics
    }

    pub fn into_diagnostics(self) -> Vec<LineDiagnostic> {
        self.diagnostics
    }
}

impl Iterator for DocumentStream {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => {
                    self.done = true;
                    return Some(Err(Error::io(&self.path, e)));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<Document>(&line)
                .map_err(|e| e.to_string())
                .and_then(|doc| doc.validate().map(|_| doc).map_err(|e| e.to_string()));
            match parsed {
                Ok(doc) => return Some(Ok(doc)),
                Err(message) => match self.mode {
                    LoadMode::Lenient => {
                        tracing::warn!(path = %self.path.display(), line = self.line_no, %message, "skipping invalid line");
                        self.diagnostics.push(LineDiagnostic {
                            line: self.line_no,
                            message,
                        });
                    }
                    LoadMode::Strict => {
                        self.done = true;
                        return Some(Err(Error::Schema {
                            path: self.path.clone(),
                            line: self.line_no,
                            message,
                        }));
                    }
                },
            }
        }
        None
    }
}

/// Open a JSONL corpus file for streaming.
pub fn load_jsonl(path: &Path, mode: LoadMode) -> Result<DocumentStream> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(DocumentStream {
        path: path.to_path_buf(),
        lines: BufReader::new(file).lines(),
        line_no: 0,
        mode,
        diagnostics: Vec::new(),
        done: false,
    })
}

/// Write documents one JSON object per line.
pub fn write_jsonl<'a, W, I>(mut out: W, docs: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Document>,
{
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}
