use std::sync::OnceLock;

use regex::Regex;

use crate::corpus::{PocReport, SourceId};

fn body_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\bCVE-(\d{4})-(\d{4,})\b").unwrap())
}

fn field_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^(?:CVE[-_ ]?)?(\d{4})-(\d{4,})$").unwrap())
}

/// Canonical upper-case `CVE-YYYY-NNNN...` form of a field value, accepting the
/// bare `YYYY-NNNN` form some platforms store.
pub fn normalize_cve_id(raw: &str) -> Option<String> {
    let caps = field_pattern().captures(raw.trim())?;
    Some(format!("CVE-{}-{}", &caps[1], &caps[2]))
}

/// All CVE ids mentioned in free text, deduplicated in order.
pub fn scan_cve_ids(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for caps in body_pattern().captures_iter(text) {
        let id = format!("CVE-{}-{}", &caps[1], &caps[2]);
        if !out.contains(&id) {
            out.push(id);
        }
    }
    out
}

/// Where a platform keeps CVE ids. The record's `cve_ids` field always wins;
/// `header` names the in-body metadata line some platforms emit.
#[derive(Debug, Clone)]
pub struct SourceStrategy {
    header: Option<Regex>,
}

impl SourceStrategy {
    pub fn for_source(source: &SourceId) -> SourceStrategy {
        let header = match source {
            // "# CVE : CVE-2003-0264"
            SourceId::ExploitDb => Some(r"(?im)^\s*#?\s*CVE\s*:\s*(.+)$"),
            // "CVE | CVE-2003-0264" or "CVE: ..."
            SourceId::PacketStorm => Some(r"(?im)^\s*CVEs?\s*[|:]\s*(.+)$"),
            // "CVE-ID: CVE-2003-0264"
            SourceId::Seebug => Some(r"(?im)^\s*CVE[- ]?IDs?\s*[:：]\s*(.+)$"),
            // "CVE: CVE-2003-0264" / "CVE ID: ..."
            SourceId::CxSecurity => Some(r"(?im)^\s*CVE(?:\s*IDs?)?\s*:\s*(.+)$"),
            SourceId::Other(_) => None,
        };
        SourceStrategy {
            header: header.map(|p| Regex::new(p).expect("static header pattern")),
        }
    }

    pub fn body_only() -> SourceStrategy {
        SourceStrategy { header: None }
    }
}

/// CVE ids for `report`: the dedicated record field, else the platform's
/// metadata line, else a body scan.
pub fn extract_cve_ids(report: &PocReport, strategy: &SourceStrategy) -> Vec<String> {
    if !report.cve_ids.is_empty() {
        return report.cve_ids.clone();
    }
    if let Some(header) = &strategy.header {
        let mut found = false;
        let mut out: Vec<String> = Vec::new();
        for caps in header.captures_iter(&report.raw_content) {
            found = true;
            for part in caps[1].split([',', ';', ' ', '\t', '|']) {
                if let Some(id) = normalize_cve_id(part.trim_matches(|c: char| !c.is_ascii_alphanumeric() && c != '-')) {
                    if !out.contains(&id) {
                        out.push(id);
                    }
                }
            }
        }
        if found {
            return out;
        }
    }
    scan_cve_ids(&report.raw_content)
}
