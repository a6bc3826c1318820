//! JATS full-text XML to [`Document`].

use std::path::Path;

use quick_xml::escape::resolve_xml_entity;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{Document, LicenseClass};
use crate::error::{Error, Result};
use crate::registry::normalize_url;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JatsDiagnostics {
    /// Invalid UTF-8 sequences replaced with U+FFFD.
    pub replaced_sequences: usize,
    pub unresolved_entities: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Part {
    Title,
    Abstract,
    Body,
    Back,
}

struct Block {
    part: Part,
    depth: usize,
    text: String,
}

struct Link {
    href: String,
    text_start: usize,
    depth: usize,
}

#[derive(Default)]
struct Collector {
    stack: Vec<Vec<u8>>,
    block: Option<Block>,
    links: Vec<Link>,
    title: Vec<String>,
    abstract_: Vec<String>,
    body: Vec<String>,
    back: Vec<String>,
    ids: Vec<(String, String)>,
    year: Option<i32>,
    in_year: bool,
    id_type: Option<String>,
    id_text: String,
}

impl Collector {
    fn inside(&self, name: &[u8]) -> bool {
        self.stack.iter().any(|n| n == name)
    }

    fn part(&self) -> Option<Part> {
        if self.inside(b"abstract") || self.inside(b"trans-abstract") {
            Some(Part::Abstract)
        } else if self.inside(b"body") {
            Some(Part::Body)
        } else if self.inside(b"back") {
            Some(Part::Back)
        } else {
            None
        }
    }

    fn push_text(&mut self, text: &str) {
        if let Some(block) = &mut self.block {
            block.text.push_str(text);
        }
        if self.in_year || self.id_type.is_some() {
            self.id_text.push_str(text);
        }
    }

    fn open(&mut self, e: &BytesStart<'_>, empty: bool) {
        let name = e.local_name().as_ref().to_vec();
        let depth = self.stack.len() + 1;

        if self.block.is_none() {
            let part = match name.as_slice() {
                b"article-title" if self.inside(b"title-group") && self.inside(b"article-meta") => Some(Part::Title),
                b"p" => self.part(),
                b"mixed-citation" | b"element-citation" | b"nlm-citation" if self.inside(b"back") => Some(Part::Back),
                _ => None,
            };
            if let Some(part) = part {
                if !empty {
                    self.block = Some(Block {
                        part,
                        depth,
                        text: String::new(),
                    });
                }
            }
        } else if matches!(name.as_slice(), b"p" | b"list-item" | b"td" | b"th" | b"tr" | b"break" | b"title") {
            self.push_text(" ");
        }

        match name.as_slice() {
            b"ext-link" | b"uri" | b"self-uri" => {
                if let Some(href) = href(e) {
                    let text_start = self.block.as_ref().map_or(0, |b| b.text.len());
                    if empty {
                        self.push_text(&format!(" {href} "));
                    } else {
                        self.links.push(Link { href, text_start, depth });
                    }
                }
            }
            b"article-id" if !empty => {
                let kind = e
                    .try_get_attribute("pub-id-type")
                    .ok()
                    .flatten()
                    .and_then(|a| a.unescape_value().ok().map(|v| v.into_owned()))
                    .unwrap_or_default();
                self.id_type = Some(kind);
                self.id_text.clear();
            }
            b"year" if !empty && self.year.is_none() && self.inside(b"pub-date") && self.inside(b"article-meta") => {
                self.in_year = true;
                self.id_text.clear();
            }
            _ => {}
        }

        if !empty {
            self.stack.push(name);
        }
    }

    fn close(&mut self) {
        let depth = self.stack.len();
        let Some(name) = self.stack.pop() else { return };

        if let Some(link) = self.links.pop_if(|l| l.depth == depth) {
            if let Some(block) = &mut self.block {
                let shown = block.text.get(link.text_start..).unwrap_or_default();
                if !normalize_url(shown).contains(&normalize_url(&link.href)) {
                    block.text.push(' ');
                    block.text.push_str(&link.href);
                    block.text.push(' ');
                }
            }
        }

        match name.as_slice() {
            b"article-id" => {
                if let Some(kind) = self.id_type.take() {
                    let value = self.id_text.trim().to_string();
                    if !value.is_empty() {
                        self.ids.push((kind, value));
                    }
                }
            }
            b"year" if self.in_year => {
                self.in_year = false;
                self.year = self.id_text.trim().parse().ok();
            }
            b"p" | b"list-item" | b"td" | b"th" | b"tr" | b"title" if self.block.as_ref().is_some_and(|b| b.depth < depth) => {
                self.push_text(" ");
            }
            _ => {}
        }

        if self.block.as_ref().is_some_and(|b| b.depth == depth) {
            let block = self.block.take().expect("checked above");
            let text = collapse_whitespace(&block.text);
            if !text.is_empty() {
                match block.part {
                    Part::Title => self.title.push(text),
                    Part::Abstract => self.abstract_.push(text),
                    Part::Body => self.body.push(text),
                    Part::Back => self.back.push(text),
                }
            }
        }
    }

    fn doc_id(&self) -> Option<String> {
        for wanted in ["pmc", "pmcid", "pmid", "doi", "publisher-id"] {
            if let Some((_, v)) = self.ids.iter().find(|(k, _)| k == wanted) {
                return Some(if wanted == "pmc" && v.bytes().all(|b| b.is_ascii_digit()) {
                    format!("PMC{v}")
                } else {
                    v.clone()
                });
            }
        }
        None
    }
}

fn href(e: &BytesStart<'_>) -> Option<String> {
    e.attributes().flatten().find_map(|a| {
        let key = a.key.as_ref();
        if key == b"xlink:href" || key == b"href" || key.ends_with(b":href") {
            a.unescape_value().ok().map(|v| v.trim().to_string()).filter(|v| !v.is_empty())
        } else {
            None
        }
    })
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn decode_lossy(bytes: &[u8]) -> (std::borrow::Cow<'_, str>, usize) {
    match std::str::from_utf8(bytes) {
        Ok(s) => (s.into(), 0),
        Err(_) => {
            let replaced = bytes.utf8_chunks().filter(|c| !c.invalid().is_empty()).count();
            (String::from_utf8_lossy(bytes), replaced)
        }
    }
}

/// Parse a JATS article.
///
/// `body_text` is the article title, abstract paragraphs, body paragraphs and
/// back-matter paragraphs and citations, one per line in document order.
pub fn parse_jats(xml: &[u8]) -> Result<Document> {
    parse_jats_with_diagnostics(xml).map(|(doc, _)| doc)
}

pub fn parse_jats_with_diagnostics(xml: &[u8]) -> Result<(Document, JatsDiagnostics)> {
    let (text, replaced) = decode_lossy(xml);
    let mut diagnostics = JatsDiagnostics {
        replaced_sequences: replaced,
        ..Default::default()
    };
    let mut reader = Reader::from_str(&text);
    let mut c = Collector::default();
    loop {
        let event = reader.read_event().map_err(|e| Error::Xml {
            offset: reader.error_position(),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(e) => c.open(&e, false),
            Event::Empty(e) => c.open(&e, true),
            Event::End(_) => c.close(),
            Event::Text(t) => {
                let s = t.decode().map_err(|e| Error::Xml {
                    offset: reader.buffer_position(),
                    message: e.to_string(),
                })?;
                c.push_text(&s);
            }
            Event::CData(t) => {
                let s = t.decode().map_err(|e| Error::Xml {
                    offset: reader.buffer_position(),
                    message: e.to_string(),
                })?;
                c.push_text(&s);
            }
            Event::GeneralRef(r) => {
                let resolved = match r.resolve_char_ref() {
                    Ok(Some(ch)) => Some(ch.to_string()),
                    _ => {
                        let name = r.decode().unwrap_or_default();
                        resolve_xml_entity(&name).map(str::to_string)
                    }
                };
                match resolved {
                    Some(s) => c.push_text(&s),
                    None => {
                        diagnostics.unresolved_entities += 1;
                        c.push_text(" ");
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !c.stack.is_empty() {
        return Err(Error::Xml {
            offset: reader.buffer_position(),
            message: format!(
                "unexpected end of input inside <{}>",
                String::from_utf8_lossy(c.stack.last().expect("non-empty"))
            ),
        });
    }
    if c.abstract_.is_empty() && c.body.is_empty() {
        return Err(Error::EmptyDocument);
    }

    let title = c.title.join(" ");
    let mut lines = Vec::with_capacity(1 + c.abstract_.len() + c.body.len() + c.back.len());
    if !title.is_empty() {
        lines.push(title.clone());
    }
    lines.extend(c.abstract_.iter().cloned());
    lines.extend(c.body.iter().cloned());
    lines.extend(c.back.iter().cloned());
    let body_text = lines.join("\n");

    let doc_id = c.doc_id().unwrap_or_else(|| {
        use sha2::{Digest, Sha256};
        format!("sha256:{}", &hex::encode(Sha256::digest(xml))[..16])
    });
    Ok((
        Document {
            doc_id,
            title,
            body_text,
            pub_year: c.year,
            disciplines: Vec::new(),
            license_class: LicenseClass::Other,
            source_path: String::new(),
        },
        diagnostics,
    ))
}

/// Parse a JATS file, taking the license class from its collection
/// directory and falling back to the file stem when the article has no id.
pub fn parse_jats_file(path: &Path) -> Result<(Document, JatsDiagnostics)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (mut doc, diag) = parse_jats_with_diagnostics(&bytes)?;
    if doc.doc_id.starts_with("sha256:") {
        if let Some(stem) = path.file_stem() {
            doc.doc_id = stem.to_string_lossy().into_owned();
        }
    }
    doc.license_class = LicenseClass::from_path(path);
    doc.source_path = path.display().to_string();
    Ok((doc, diag))
}
