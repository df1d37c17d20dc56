//! Code/text categorization of PoC bodies by per-language signature patterns.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{ContentKind, PocReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageId {
    CCpp,
    Html,
    Java,
    JavaScript,
    Perl,
    Php,
    Python,
    Ruby,
    Shell,
}

impl LanguageId {
    /// Fixed order; also the tie-break order for detection.
    pub const ALL: [LanguageId; 9] = [
        LanguageId::CCpp,
        LanguageId::Html,
        LanguageId::Java,
        LanguageId::JavaScript,
        LanguageId::Perl,
        LanguageId::Php,
        LanguageId::Python,
        LanguageId::Ruby,
        LanguageId::Shell,
    ];

    pub fn key(self) -> &'static str {
        match self {
            LanguageId::CCpp => "c_cpp",
            LanguageId::Html => "html",
            LanguageId::Java => "java",
            LanguageId::JavaScript => "javascript",
            LanguageId::Perl => "perl",
            LanguageId::Php => "php",
            LanguageId::Python => "python",
            LanguageId::Ruby => "ruby",
            LanguageId::Shell => "shell",
        }
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for LanguageId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LanguageId::ALL
            .into_iter()
            .find(|l| l.key() == s.trim())
            .ok_or_else(|| Error::Invalid(format!("unknown language {s:?}")))
    }
}

#[derive(Debug, Clone)]
pub struct SignaturePattern {
    pub regex: Regex,
    pub weight: u32,
}

#[derive(Debug, Clone)]
pub struct LanguageSignature {
    pub language: LanguageId,
    pub patterns: Vec<SignaturePattern>,
    pub min_hits: u32,
}

impl LanguageSignature {
    /// Weighted count of lines matched, summed over patterns.
    pub fn score(&self, content: &str) -> u32 {
        content
            .lines()
            .map(|line| {
                self.patterns
                    .iter()
                    .filter(|p| p.regex.is_match(line))
                    .map(|p| p.weight)
                    .sum::<u32>()
            })
            .sum()
    }
}

const SIGNATURE_FORMAT: &str = "pocfuse-signatures";
const SIGNATURE_VERSION: u32 = 1;
const DEFAULT_MIN_HITS: u32 = 2;

static DEFAULT_TABLE_TSV: &str = include_str!("../data/signatures.tsv");

#[derive(Debug, Clone)]
pub struct SignatureTable {
    signatures: Vec<LanguageSignature>,
}

impl SignatureTable {
    /// The table shipped with the crate.
    pub fn builtin() -> &'static SignatureTable {
        static TABLE: OnceLock<SignatureTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            SignatureTable::parse(DEFAULT_TABLE_TSV).expect("bundled signature table is valid")
        })
    }

    pub fn load(path: &Path) -> Result<SignatureTable> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SignatureTable::parse(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn parse(text: &str) -> Result<SignatureTable> {
        let mut saw_header = false;
        let mut min_hits = [DEFAULT_MIN_HITS; 9];
        let mut patterns: Vec<Vec<SignaturePattern>> = vec![Vec::new(); 9];

        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.splitn(4, '\t').collect();
            let bad = |what: &str| Error::Invalid(format!("signature table line {line_no}: {what}"));
            match fields.as_slice() {
                ["format", name, version] => {
                    if *name != SIGNATURE_FORMAT {
                        return Err(bad(&format!("unknown format {name:?}")));
                    }
                    let v: u32 = version.trim().parse().map_err(|_| bad("bad version"))?;
                    if v != SIGNATURE_VERSION {
                        return Err(bad(&format!(
                            "unsupported version {v} (expected {SIGNATURE_VERSION})"
                        )));
                    }
                    saw_header = true;
                }
                _ if !saw_header => return Err(bad("missing format header")),
                ["min", lang, n] => {
                    let lang: LanguageId = lang.parse()?;
                    let n: u32 = n.trim().parse().map_err(|_| bad("bad min_hits"))?;
                    if n == 0 {
                        return Err(bad("min_hits must be at least 1"));
                    }
                    min_hits[lang as usize] = n;
                }
                ["sig", lang, weight, pattern] => {
                    let lang: LanguageId = lang.parse()?;
                    let weight: u32 = weight.trim().parse().map_err(|_| bad("bad weight"))?;
                    let regex = Regex::new(pattern).map_err(|source| Error::Pattern {
                        pattern: pattern.to_string(),
                        source,
                    })?;
                    patterns[lang as usize].push(SignaturePattern { regex, weight });
                }
                _ => return Err(bad("unrecognized record")),
            }
        }
        if !saw_header {
            return Err(Error::Invalid("signature table has no format header".into()));
        }

        let signatures = LanguageId::ALL
            .into_iter()
            .zip(patterns)
            .map(|(language, patterns)| {
                if patterns.is_empty() {
                    return Err(Error::Invalid(format!(
                        "signature table has no patterns for {language}"
                    )));
                }
                Ok(LanguageSignature {
                    language,
                    patterns,
                    min_hits: min_hits[language as usize],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SignatureTable { signatures })
    }

    pub fn signatures(&self) -> &[LanguageSignature] {
        &self.signatures
    }

    /// Highest-scoring language whose score reaches its `min_hits`.
    /// Ties go to the earlier language in [`LanguageId::ALL`].
    pub fn detect(&self, content: &str) -> Option<(LanguageId, u32)> {
        let mut best: Option<(LanguageId, u32)> = None;
        for sig in &self.signatures {
            let score = sig.score(content);
            if score < sig.min_hits {
                continue;
            }
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((sig.language, score));
            }
        }
        best
    }
}

pub fn detect_language(content: &str) -> Option<(LanguageId, u32)> {
    SignatureTable::builtin().detect(content)
}

pub fn categorize(report: &PocReport) -> Result<PocReport> {
    categorize_with(report, SignatureTable::builtin())
}

pub fn categorize_with(report: &PocReport, table: &SignatureTable) -> Result<PocReport> {
    if report.content_kind != ContentKind::Unclassified {
        return Err(Error::Precondition(format!(
            "report {} is already classified as {:?}",
            report.id, report.content_kind
        )));
    }
    let mut out = report.clone();
    out.content_kind = match table.detect(&report.raw_content) {
        Some((lang, _)) => ContentKind::Code(lang),
        None => ContentKind::Text,
    };
    Ok(out)
}
