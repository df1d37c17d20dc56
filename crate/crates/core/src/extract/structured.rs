//! Structured aspects (platform, version, title, author, publish time).
//!
//! Any [`StructuredExtractor`] may fill these slots; its output must be
//! deterministic and every span must point at its own text. The crate ships
//! [`PatternExtractor`], which reads metadata header lines, and
//! [`HttpExtractor`], a client for an external tagging service.
//!
//! Wire format for the external service (schema version 1), offsets are
//! Unicode scalar indices, end exclusive:
//!
//! ```text
//! request:  {"schema_version": 1, "id": "edb-638", "content": "..."}
//! response: {"title": [{"text": "...", "start": 0, "end": 12}], "author": [...], ...}
//! ```
//!
//! Response keys are slot names (`test_platform`, `software_version`, `title`,
//! `author`, `publish_time`) plus the optional `software`.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Aspect, ContentKind, PocReport};

pub const EXTRACTOR_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_EXTRACTOR_DEADLINE: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredExtraction {
    pub slots: BTreeMap<Aspect, Vec<Span>>,
    #[serde(default)]
    pub software: Vec<Span>,
}

impl StructuredExtraction {
    pub fn get(&self, aspect: Aspect) -> &[Span] {
        self.slots.get(&aspect).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Checks slot names and that every span addresses its own text.
    pub fn validate(&self, content: &str) -> Result<(), ExtractorError> {
        let offsets = char_offsets(content);
        let n_chars = offsets.len() - 1;
        for (aspect, spans) in &self.slots {
            if !Aspect::STRUCTURED.contains(aspect) {
                return Err(ExtractorError::Contract(format!(
                    "slot {aspect} is not a structured slot"
                )));
            }
            for span in spans {
                check_span(content, &offsets, n_chars, span)?;
            }
        }
        for span in &self.software {
            check_span(content, &offsets, n_chars, span)?;
        }
        Ok(())
    }
}

fn check_span(content: &str, offsets: &[usize], n_chars: usize, span: &Span) -> Result<(), ExtractorError> {
    if span.start > span.end || span.end > n_chars {
        return Err(ExtractorError::Contract(format!(
            "span {}..{} outside document of {n_chars} chars",
            span.start, span.end
        )));
    }
    let actual = &content[offsets[span.start]..offsets[span.end]];
    if actual != span.text {
        return Err(ExtractorError::Contract(format!(
            "span {}..{} holds {actual:?}, not {:?}",
            span.start, span.end, span.text
        )));
    }
    Ok(())
}

/// Byte offset of every char boundary, including the end.
fn char_offsets(content: &str) -> Vec<usize> {
    content
        .char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(content.len()))
        .collect()
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExtractorError {
    #[error("extractor unreachable: {0}")]
    Unreachable(String),
    #[error("extractor contract violation: {0}")]
    Contract(String),
}

pub trait StructuredExtractor: Send + Sync {
    fn name(&self) -> &str;
    fn extract(&self, report: &PocReport) -> Result<StructuredExtraction, ExtractorError>;
}

#[derive(Debug, Clone)]
pub struct StructuredOutcome {
    pub extraction: StructuredExtraction,
    /// Set when the requested extractor failed and the default stood in.
    pub degradation: Option<String>,
}

pub fn extract_structured_aspects(report: &PocReport, extractor: &dyn StructuredExtractor) -> StructuredOutcome {
    let result = extractor
        .extract(report)
        .and_then(|x| x.validate(&report.raw_content).map(|_| x));
    match result {
        Ok(extraction) => StructuredOutcome {
            extraction,
            degradation: None,
        },
        Err(e) => {
            log::warn!(
                "report {}: {} extractor failed ({e}); using pattern extractor",
                report.id,
                extractor.name()
            );
            StructuredOutcome {
                extraction: PatternExtractor.extract_infallible(report),
                degradation: Some(format!("{}: {e}", extractor.name())),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HeaderKey {
    Slot(Aspect),
    Software,
}

fn header_key(raw: &str) -> Option<HeaderKey> {
    let key = raw
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase();
    let key = key.trim_end_matches("(s)");
    Some(match key {
        "title" | "exploit title" | "exploit name" | "vulnerability title" => HeaderKey::Slot(Aspect::Title),
        "author" | "authors" | "exploit author" | "discovered by" | "found by" | "researcher" => {
            HeaderKey::Slot(Aspect::Author)
        }
        "date" | "published" | "publish date" | "published date" | "date published" | "release date"
        | "disclosure date" | "publish time" => HeaderKey::Slot(Aspect::PublishTime),
        "platform" | "tested on" | "test platform" | "tested platform" | "os" | "operating system" => {
            HeaderKey::Slot(Aspect::TestPlatform)
        }
        "version" | "versions" | "software version" | "affected version" | "affected versions"
        | "vulnerable version" | "vulnerable versions" => HeaderKey::Slot(Aspect::SoftwareVersion),
        "software" | "product" | "application" | "software name" | "vulnerable software"
        | "affected software" | "affected product" => HeaderKey::Software,
        _ => return None,
    })
}

fn header_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(concat!(
            r"^\s*(?:#+|//+|--+|/\*+|\*+|;+|%+|(?i:rem)\s)?\s*",
            r"(?P<key>[A-Za-z][A-Za-z ()/_-]{0,30}?)\s*[:：|]\s*",
            r"(?P<val>.*?)\s*(?:\*/)?\s*$",
        ))
        .unwrap()
    })
}

fn comment_prefix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:#+|//+|/\*+|\*+|--+|;+|<!--)\s*").unwrap())
}

const PLACEHOLDERS: &[&str] = &["n/a", "na", "-", "none", "unknown", "tbd", "?"];

const MAX_TITLE_CHARS: usize = 150;

/// Reads `Key: value` metadata lines; falls back to the first line as title.
#[derive(Debug, Clone, Copy, Default)]
pub struct PatternExtractor;

impl PatternExtractor {
    pub fn extract_infallible(&self, report: &PocReport) -> StructuredExtraction {
        let content = report.raw_content.as_str();
        let offsets = char_offsets(content);
        let to_span = |start: usize, end: usize| Span {
            text: content[start..end].to_string(),
            start: offsets.partition_point(|&b| b < start),
            end: offsets.partition_point(|&b| b < end),
        };

        let mut out = StructuredExtraction::default();
        let mut title_candidate: Option<(usize, usize)> = None;
        let mut first_line_seen = false;
        let mut line_start = 0;

        for piece in content.split_inclusive('\n') {
            let line = piece.trim_end_matches(['\n', '\r']);
            let base = line_start;
            line_start += piece.len();

            if let Some(caps) = header_pattern().captures(line) {
                if let Some(key) = header_key(&caps["key"]) {
                    let val = caps.name("val").unwrap();
                    let text = val.as_str().trim();
                    if !text.is_empty() && !PLACEHOLDERS.contains(&text.to_lowercase().as_str()) {
                        let span = to_span(base + val.start(), base + val.end());
                        match key {
                            HeaderKey::Slot(aspect) => push_span(out.slots.entry(aspect).or_default(), span),
                            HeaderKey::Software => push_span(&mut out.software, span),
                        }
                    }
                    first_line_seen = true;
                    continue;
                }
            }

            if first_line_seen || line.trim().is_empty() {
                continue;
            }
            let trimmed = line.trim();
            if trimmed.starts_with("#!") || !trimmed.chars().any(char::is_alphanumeric) || trimmed.contains("coding:") || trimmed.contains("coding=") {
                continue;
            }
            first_line_seen = true;
            let prefix = comment_prefix().find(line);
            let is_comment = prefix.is_some();
            if matches!(report.content_kind, ContentKind::Code(_)) && !is_comment {
                continue;
            }
            let body_start = prefix.map_or(0, |m| m.end());
            let body = line[body_start..].trim_end();
            let body = body.strip_suffix("*/").unwrap_or(body).trim_end();
            let body = body.strip_suffix("-->").unwrap_or(body).trim_end();
            let lead = body.len() - body.trim_start().len();
            let start = base + body_start + lead;
            let end = base + body_start + body.len();
            if start < end
                && content[start..end].chars().count() <= MAX_TITLE_CHARS
                && content[start..end].chars().any(char::is_alphanumeric)
            {
                title_candidate = Some((start, end));
            }
        }

        if out.get(Aspect::Title).is_empty() {
            if let Some((s, e)) = title_candidate {
                out.slots.insert(Aspect::Title, vec![to_span(s, e)]);
            }
        }

        // Software names implied by "Name 1.2" style titles and versions.
        let derived: Vec<Span> = [Aspect::SoftwareVersion, Aspect::Title]
            .into_iter()
            .flat_map(|a| out.get(a).to_vec())
            .filter_map(|span| {
                let (s, e) = software_prefix(&span.text)?;
                let byte_start = offsets[span.start];
                Some(to_span(byte_start + s, byte_start + e))
            })
            .collect();
        for span in derived {
            push_span(&mut out.software, span);
        }
        out
    }
}

impl StructuredExtractor for PatternExtractor {
    fn name(&self) -> &str {
        "pattern"
    }

    fn extract(&self, report: &PocReport) -> Result<StructuredExtraction, ExtractorError> {
        Ok(self.extract_infallible(report))
    }
}

fn push_span(list: &mut Vec<Span>, span: Span) {
    let key = span.text.trim().to_lowercase();
    if !list.iter().any(|s| s.text.trim().to_lowercase() == key) {
        list.push(span);
    }
}

/// Byte range of the product name in "Name 1.2 ..." style text: up to four
/// words before the first word carrying a digit.
pub(crate) fn software_prefix(text: &str) -> Option<(usize, usize)> {
    static WORD: OnceLock<Regex> = OnceLock::new();
    let word_re = WORD.get_or_init(|| Regex::new(r"\S+").unwrap());
    let mut name: Option<(usize, usize)> = None;
    let mut words = 0;
    let mut closed = false;
    for m in word_re.find_iter(text) {
        let word = m.as_str();
        if word.chars().any(|c| c.is_ascii_digit()) {
            return name.filter(|_| words <= 4);
        }
        let connective = matches!(
            word.to_lowercase().as_str(),
            "<" | "<=" | "before" | "prior" | "to" | "v" | "version" | "versions"
        );
        if connective && name.is_some() {
            closed = true;
            continue;
        }
        let name_like = word.chars().any(char::is_alphabetic)
            && word.chars().all(|c| c.is_alphanumeric() || "._+-'".contains(c));
        if connective || closed || !name_like {
            return None;
        }
        name = Some((name.map_or(m.start(), |(s, _)| s), m.end()));
        words += 1;
    }
    None
}

#[derive(Serialize)]
struct WireRequest<'a> {
    schema_version: u32,
    id: &'a str,
    content: &'a str,
}

/// Client for an external structured-extraction service.
pub struct HttpExtractor {
    url: String,
    agent: ureq::Agent,
}

impl HttpExtractor {
    pub fn new(url: impl Into<String>, deadline: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(deadline))
            .build()
            .into();
        HttpExtractor {
            url: url.into(),
            agent,
        }
    }
}

impl StructuredExtractor for HttpExtractor {
    fn name(&self) -> &str {
        "http"
    }

    fn extract(&self, report: &PocReport) -> Result<StructuredExtraction, ExtractorError> {
        let request = WireRequest {
            schema_version: EXTRACTOR_SCHEMA_VERSION,
            id: &report.id,
            content: &report.raw_content,
        };
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(&request)
            .map_err(|e| ExtractorError::Unreachable(e.to_string()))?;
        let raw: BTreeMap<String, Vec<Span>> = response
            .body_mut()
            .read_json()
            .map_err(|e| ExtractorError::Contract(format!("bad response body: {e}")))?;
        let mut out = StructuredExtraction::default();
        for (key, spans) in raw {
            if key == "software" {
                out.software = spans;
                continue;
            }
            let aspect: Aspect = key
                .parse()
                .map_err(|_| ExtractorError::Contract(format!("unknown slot {key:?}")))?;
            out.slots.insert(aspect, spans);
        }
        Ok(out)
    }
}
