//! Keyword and pattern rules for trigger steps, verification oracles and
//! references.

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub trigger_keywords: Vec<String>,
    pub oracle_keywords: Vec<String>,
    pub step_list_patterns: Vec<String>,
    pub url_pattern: String,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            trigger_keywords: [
                "steps",
                "reproduce",
                "complie with",
                "compile with",
                "to reproduce",
                "reproduction",
                "how to use",
            ]
            .map(String::from)
            .to_vec(),
            oracle_keywords: [
                "expected output",
                "PoC output",
                "expected result",
                "sample output",
                "exploit output",
            ]
            .map(String::from)
            .to_vec(),
            step_list_patterns: vec![
                // 1. / 2) / (3)
                r"^\s*(?:#+|//+|\*|-)?\s*\(?\d{1,2}[.)]\s+\S".into(),
                // a) / b.
                r"^\s*(?:#+|//+|\*|-)?\s*\(?[a-hA-H][.)]\s+\S".into(),
                // Step 1: / step 2 -
                r"(?i)^\s*(?:#+|//+|\*|-)?\s*step\s*\d{1,2}\s*[:.)-]".into(),
            ],
            url_pattern: concat!(
                r"(?i)\b(?:https?|ftp)://",
                r"(?:[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?)(?:\.[a-z0-9](?:[a-z0-9-]{0,61}[a-z0-9])?)*",
                r"(?::\d{1,5})?",
                r#"(?:[/?#][^\s<>"'`\\{}|^]*)?"#,
            )
            .into(),
        }
    }
}

/// A [`RuleSet`] with its patterns compiled.
#[derive(Debug, Clone)]
pub struct Rules {
    trigger: Vec<Regex>,
    oracle: Vec<Regex>,
    step_items: Vec<Regex>,
    url: Regex,
}

fn keyword_regex(keyword: &str) -> Result<Regex> {
    let words: Vec<String> = keyword.split_whitespace().map(regex::escape).collect();
    if words.is_empty() {
        return Err(Error::Invalid("empty keyword in rule set".into()));
    }
    let pattern = format!(r"\b{}\b", words.join(r"\s+"));
    RegexBuilder::new(&pattern)
        .case_insensitive(true)
        .build()
        .map_err(|source| Error::Pattern { pattern, source })
}

fn compile(pattern: &str) -> Result<Regex> {
    Regex::new(pattern).map_err(|source| Error::Pattern {
        pattern: pattern.to_string(),
        source,
    })
}

impl Rules {
    pub fn new(set: &RuleSet) -> Result<Rules> {
        Ok(Rules {
            trigger: set.trigger_keywords.iter().map(|k| keyword_regex(k)).collect::<Result<_>>()?,
            oracle: set.oracle_keywords.iter().map(|k| keyword_regex(k)).collect::<Result<_>>()?,
            step_items: set.step_list_patterns.iter().map(|p| compile(p)).collect::<Result<_>>()?,
            url: compile(&set.url_pattern)?,
        })
    }

    fn is_step_item(&self, line: &str) -> bool {
        self.item_style(line).is_some()
    }

    /// Which enumeration pattern the line starts with; a list keeps one style.
    fn item_style(&self, line: &str) -> Option<usize> {
        self.step_items.iter().position(|r| r.is_match(line))
    }
}

impl Default for Rules {
    fn default() -> Self {
        Rules::new(&RuleSet::default()).expect("default rule set compiles")
    }
}

#[derive(Debug, Clone, Copy)]
struct Line<'a> {
    start: usize,
    end: usize,
    text: &'a str,
}

impl Line<'_> {
    fn is_blank(&self) -> bool {
        self.text.trim().is_empty()
    }
}

fn split_lines(content: &str) -> Vec<Line<'_>> {
    let mut lines = Vec::new();
    let mut start = 0;
    for piece in content.split_inclusive('\n') {
        let text = piece.trim_end_matches(['\n', '\r']);
        lines.push(Line {
            start,
            end: start + text.len(),
            text,
        });
        start += piece.len();
    }
    lines
}

/// Inclusive line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Region {
    first: usize,
    last: usize,
}

impl Region {
    fn len(self) -> usize {
        self.last - self.first + 1
    }

    fn overlaps(self, other: Region) -> bool {
        self.first <= other.last && other.first <= self.last
    }
}

/// Keeps non-overlapping regions, longest first (earlier start breaks ties),
/// and returns them in document order.
fn resolve_overlaps(mut candidates: Vec<Region>) -> Vec<Region> {
    candidates.sort_by(|a, b| b.len().cmp(&a.len()).then(a.first.cmp(&b.first)));
    let mut kept: Vec<Region> = Vec::new();
    for c in candidates {
        if kept.iter().all(|k| !k.overlaps(c)) {
            kept.push(c);
        }
    }
    kept.sort_by_key(|r| r.first);
    kept
}

fn region_text<'a>(content: &'a str, lines: &[Line<'_>], r: Region) -> &'a str {
    content[lines[r.first].start..lines[r.last].end].trim()
}

fn is_indented(line: &Line<'_>) -> bool {
    line.text.starts_with([' ', '\t']) && !line.is_blank()
}

/// Extends an enumerated block starting after `from`. Items may be separated by
/// one blank line and followed by indented continuation lines.
fn step_block_end(rules: &Rules, lines: &[Line<'_>], from: usize) -> Option<usize> {
    let mut i = from + 1;
    let mut last_item = None;
    let mut style = None;
    loop {
        if i < lines.len() && lines[i].is_blank() {
            i += 1;
        }
        if i >= lines.len() {
            break;
        }
        let here = rules.item_style(lines[i].text);
        if here.is_none() || (style.is_some() && here != style) {
            break;
        }
        style = here;
        let mut end = i;
        while end + 1 < lines.len()
            && is_indented(&lines[end + 1])
            && !rules.is_step_item(lines[end + 1].text)
        {
            end += 1;
        }
        last_item = Some(end);
        i = end + 1;
    }
    last_item
}

/// Regions holding reproduction steps: a trigger-keyword line plus the
/// enumerated list after it, or a free-standing list of at least two items.
pub fn extract_trigger_step(content: &str, rules: &Rules) -> Vec<String> {
    let lines = split_lines(content);
    let mut candidates = Vec::new();

    for (i, line) in lines.iter().enumerate() {
        if rules.trigger.iter().any(|k| k.is_match(line.text)) {
            let last = step_block_end(rules, &lines, i).unwrap_or(i);
            candidates.push(Region { first: i, last });
        }
    }

    let mut i = 0;
    while i < lines.len() {
        let Some(style) = rules.item_style(lines[i].text) else {
            i += 1;
            continue;
        };
        let mut items = 1;
        let mut last = i;
        let mut j = i + 1;
        loop {
            while j < lines.len() && is_indented(&lines[j]) && !rules.is_step_item(lines[j].text) {
                last = j;
                j += 1;
            }
            let next = if j < lines.len() && lines[j].is_blank() { j + 1 } else { j };
            if next < lines.len() && rules.item_style(lines[next].text) == Some(style) {
                items += 1;
                last = next;
                j = next + 1;
            } else {
                break;
            }
        }
        if items >= 2 {
            candidates.push(Region { first: i, last });
        }
        i = last + 1;
    }

    resolve_overlaps(candidates)
        .into_iter()
        .map(|r| region_text(content, &lines, r).to_string())
        .collect()
}

fn is_fence(line: &Line<'_>) -> bool {
    let t = line.text.trim_start();
    t.starts_with("```") || t.starts_with("~~~")
}

/// Regions holding the observable result of a run: an oracle-keyword line
/// plus the fenced or indented block after it.
pub fn extract_verification_oracle(content: &str, rules: &Rules) -> Vec<String> {
    let lines = split_lines(content);
    let mut candidates = Vec::new();

    for (i, line) in lines.iter().enumerate() {
        if !rules.oracle.iter().any(|k| k.is_match(line.text)) {
            continue;
        }
        let mut last = i;
        let mut j = i + 1;
        if j < lines.len() && lines[j].is_blank() {
            j += 1;
        }
        if j < lines.len() && is_fence(&lines[j]) {
            let mut k = j + 1;
            while k < lines.len() && !is_fence(&lines[k]) {
                k += 1;
            }
            last = k.min(lines.len() - 1);
        } else {
            while j < lines.len() && is_indented(&lines[j]) {
                last = j;
                j += 1;
            }
        }
        candidates.push(Region { first: i, last });
    }

    resolve_overlaps(candidates)
        .into_iter()
        .map(|r| region_text(content, &lines, r).to_string())
        .collect()
}

const TRAILING_PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', ')', ']', '}', '\'', '"', '>'];

/// Every http/https/ftp URL in document order, first occurrence kept.
pub fn extract_references(content: &str, rules: &Rules) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for m in rules.url.find_iter(content) {
        let url = m.as_str().trim_end_matches(TRAILING_PUNCT);
        if url.ends_with("://") {
            continue;
        }
        if !out.iter().any(|u| u == url) {
            out.push(url.to_string());
        }
    }
    out
}
