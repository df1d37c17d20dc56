//! Line-delimited report and CVE files.
//!
//! Report file: one JSON object per line.
//!
//! ```text
//! {"id": "edb-638", "source": "ExploitDB", "content": "...",
//!  "title": "SLMail 5.5 POP3 PASS overflow", "author": "...", "publish_time": "...",
//!  "platform": "...", "version": "...", "references": ["..."], "cve_ids": ["2003-0264"]}
//! ```
//!
//! `id`, `source` and `content` are required. The scalar optional fields accept a
//! string or a list of strings.
//!
//! CVE file: one JSON object per line.
//!
//! ```text
//! {"cve_id": "CVE-2003-0264", "products": [{"name": "SLMail", "versions": ["5.5"]}],
//!  "platforms": ["Windows"]}
//! ```

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::types::{push_unique, Aspect, AspectValue, CveDb, CveEntry, PocReport, Product, SourceId};
use crate::error::{Error, Result};
use crate::extract::normalize_cve_id;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestWarning {
    pub path: PathBuf,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.path.display(), self.line, self.message)
    }
}

/// Parsed items plus the warnings produced while reading them.
#[derive(Debug, Clone)]
pub struct Ingested<T> {
    pub items: T,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ReportRecord {
    id: String,
    source: String,
    content: String,
    title: Option<OneOrMany>,
    author: Option<OneOrMany>,
    publish_time: Option<OneOrMany>,
    platform: Option<OneOrMany>,
    version: Option<OneOrMany>,
    references: Option<Vec<String>>,
    cve_ids: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
struct CveRecord {
    cve_id: String,
    #[serde(default)]
    products: Vec<Product>,
    #[serde(default)]
    platforms: Vec<String>,
}

/// Yields (1-based line number, lossily decoded line) for non-blank lines.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes
        .split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, raw)| {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            (i + 1, String::from_utf8_lossy(raw).into_owned())
        })
        .filter(|(_, line)| !line.trim().is_empty())
        .collect())
}

pub fn ingest_reports(path: &Path, source: &SourceId) -> Result<Ingested<Vec<PocReport>>> {
    let mut reports = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    let mut warn = |line: usize, message: String| {
        log::warn!("{}:{line}: {message}", path.display());
        warnings.push(IngestWarning {
            path: path.to_path_buf(),
            line,
            message,
        });
    };

    for (line_no, line) in read_lines(path)? {
        let record: ReportRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                warn(line_no, format!("malformed record skipped: {e}"));
                continue;
            }
        };
        match record.source.parse::<SourceId>() {
            Ok(s) if &s == source => {}
            Ok(s) => {
                warn(
                    line_no,
                    format!("record source {s} does not match expected source {source}; skipped"),
                );
                continue;
            }
            Err(e) => {
                warn(line_no, format!("{e}; record skipped"));
                continue;
            }
        }
        let id = record.id.trim().to_string();
        if id.is_empty() {
            warn(line_no, "record has an empty id; skipped".into());
            continue;
        }
        if !seen.insert(id.clone()) {
            warn(line_no, format!("duplicate report id {id:?}; skipped"));
            continue;
        }

        let mut report = PocReport::new(id, source.clone(), record.content);
        let prefilled = [
            (Aspect::Title, record.title.map(OneOrMany::into_vec)),
            (Aspect::Author, record.author.map(OneOrMany::into_vec)),
            (Aspect::PublishTime, record.publish_time.map(OneOrMany::into_vec)),
            (Aspect::TestPlatform, record.platform.map(OneOrMany::into_vec)),
            (Aspect::SoftwareVersion, record.version.map(OneOrMany::into_vec)),
            (Aspect::Reference, record.references),
        ];
        for (aspect, values) in prefilled {
            for v in values.into_iter().flatten() {
                if let Ok(value) = AspectValue::original(&v) {
                    report.aspects.push(aspect, value);
                }
            }
        }
        for raw in record.cve_ids.into_iter().flatten() {
            if report.add_cve_id(&raw).is_err() {
                warn(line_no, format!("ignoring malformed CVE id {raw:?}"));
            }
        }
        reports.push(report);
    }

    Ok(Ingested {
        items: reports,
        warnings,
    })
}

/// Merges batches from several files, rejecting ids already seen.
pub fn merge_batches(
    batches: impl IntoIterator<Item = (PathBuf, Vec<PocReport>)>,
) -> Ingested<Vec<PocReport>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for (path, batch) in batches {
        for report in batch {
            if seen.insert(report.id.clone()) {
                out.push(report);
            } else {
                let message = format!("report id {:?} already ingested from another file; rejected", report.id);
                log::warn!("{}: {message}", path.display());
                warnings.push(IngestWarning {
                    path: path.clone(),
                    line: 0,
                    message,
                });
            }
        }
    }
    Ingested {
        items: out,
        warnings,
    }
}

pub fn ingest_cve_entries(path: &Path) -> Result<Ingested<CveDb>> {
    let mut db = CveDb::new();
    let mut warnings = Vec::new();
    let mut warn = |line: usize, message: String| {
        log::warn!("{}:{line}: {message}", path.display());
        warnings.push(IngestWarning {
            path: path.to_path_buf(),
            line,
            message,
        });
    };

    for (line_no, line) in read_lines(path)? {
        let record: CveRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                warn(line_no, format!("malformed CVE record skipped: {e}"));
                continue;
            }
        };
        let Some(cve_id) = normalize_cve_id(&record.cve_id)
            .filter(|_| record.cve_id.trim().to_ascii_uppercase().starts_with("CVE-"))
        else {
            warn(line_no, format!("malformed CVE id {:?}; skipped", record.cve_id));
            continue;
        };

        let mut products: Vec<Product> = Vec::new();
        for p in record.products {
            if p.name.trim().is_empty() {
                continue;
            }
            let mut versions = Vec::new();
            for v in p.versions {
                push_unique(&mut versions, v);
            }
            products.push(Product {
                name: p.name.trim().to_string(),
                versions,
            });
        }
        if products.is_empty() {
            warn(line_no, format!("{cve_id} has no named products; skipped"));
            continue;
        }
        let mut platforms = Vec::new();
        for p in record.platforms {
            push_unique(&mut platforms, p);
        }

        let entry = CveEntry {
            cve_id: cve_id.clone(),
            products: Vec::new(),
            platforms: Vec::new(),
        };
        db.entry(cve_id).or_insert(entry).merge(CveEntry {
            cve_id: String::new(),
            products,
            platforms,
        });
    }

    Ok(Ingested {
        items: db,
        warnings,
    })
}
