//! Deficiency and completion tables, rendered as markdown or CSV.
//!
//! Deficiency schema, one row per (source, aspect) plus a `mean` row per
//! source, then the same rows for source `all`:
//!
//! ```text
//! source,aspect,present,total,presence_rate
//! ```
//!
//! Completion schema, one row per (source, slot, origin) that has records,
//! then `all` rows per (slot, origin), then one `all,all,all` total row:
//!
//! ```text
//! source,slot,origin,pocs_completed,aspects_completed
//! ```
//!
//! Rates are printed with four decimals. Empty tables render as the header.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::complete::CompletionRecord;
use crate::corpus::{Aspect, Corpus, Provenance, SourceId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Invalid(format!("unknown report format {other:?} (expected markdown or csv)"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Markdown => "markdown",
            ReportFormat::Csv => "csv",
        })
    }
}

/// Known platforms first, in their usual order, then others by name.
pub(crate) fn source_order(s: &SourceId) -> (usize, String) {
    let rank = match s {
        SourceId::ExploitDb => 0,
        SourceId::PacketStorm => 1,
        SourceId::Seebug => 2,
        SourceId::CxSecurity => 3,
        SourceId::Other(_) => 4,
    };
    (rank, s.label().to_string())
}

fn rate(present: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        present as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Presence {
    pub present: usize,
    pub total: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceDeficiency {
    /// `None` for the all-sources row.
    pub source: Option<SourceId>,
    /// Indexed like [`Aspect::ALL`].
    pub aspects: [Presence; 8],
    /// Unweighted mean of the eight rates.
    pub mean: f64,
}

impl SourceDeficiency {
    fn build(source: Option<SourceId>, present: [usize; 8], total: usize) -> Self {
        let aspects = present.map(|p| Presence {
            present: p,
            total,
            rate: rate(p, total),
        });
        let mean = aspects.iter().map(|p| p.rate).sum::<f64>() / 8.0;
        SourceDeficiency { source, aspects, mean }
    }

    pub fn get(&self, aspect: Aspect) -> Presence {
        self.aspects[Aspect::ALL.iter().position(|&a| a == aspect).expect("aspect listed in ALL")]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeficiencyTable {
    pub per_source: Vec<SourceDeficiency>,
    pub overall: SourceDeficiency,
    /// The corpus had no reports.
    pub empty: bool,
}

/// Presence of each aspect, counting original values only.
pub fn deficiency_stats(corpus: &Corpus) -> DeficiencyTable {
    let mut by_source: BTreeMap<(usize, String), (SourceId, [usize; 8], usize)> = BTreeMap::new();
    let mut all = [0usize; 8];
    for r in corpus.reports() {
        let slot = by_source
            .entry(source_order(&r.source))
            .or_insert_with(|| (r.source.clone(), [0; 8], 0));
        slot.2 += 1;
        for (i, aspect) in Aspect::ALL.into_iter().enumerate() {
            if r.aspects.has_original(aspect) {
                slot.1[i] += 1;
                all[i] += 1;
            }
        }
    }
    let per_source = by_source
        .into_values()
        .map(|(s, present, total)| SourceDeficiency::build(Some(s), present, total))
        .collect();
    DeficiencyTable {
        per_source,
        overall: SourceDeficiency::build(None, all, corpus.len()),
        empty: corpus.is_empty(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginKind {
    Cve,
    Poc,
}

impl OriginKind {
    pub fn of(p: &Provenance) -> Option<OriginKind> {
        match p {
            Provenance::Original => None,
            Provenance::FromCve { .. } => Some(OriginKind::Cve),
            Provenance::FromPoc { .. } => Some(OriginKind::Poc),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OriginKind::Cve => "cve",
            OriginKind::Poc => "poc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRow {
    /// `None` for all-sources rows.
    pub source: Option<SourceId>,
    pub slot: Aspect,
    pub origin: OriginKind,
    pub pocs_completed: usize,
    pub aspects_completed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CompletionTable {
    pub rows: Vec<CompletionRow>,
    /// Column sums of `rows` per (slot, origin).
    pub overall: Vec<CompletionRow>,
    /// Distinct reports that received any value.
    pub total_pocs_completed: usize,
    pub total_aspects_completed: usize,
}

pub fn completion_stats(records: &[CompletionRecord], corpus: &Corpus) -> Result<CompletionTable> {
    type Key = ((usize, String), Aspect, OriginKind);
    let mut groups: BTreeMap<Key, (SourceId, BTreeSet<&str>, usize)> = BTreeMap::new();
    let mut targets = BTreeSet::new();
    for rec in records {
        let report = corpus
            .get(&rec.target)
            .ok_or_else(|| Error::UnknownReport(rec.target.clone()))?;
        let origin = OriginKind::of(&rec.origin)
            .ok_or_else(|| Error::Invalid(format!("record for {} has original provenance", rec.target)))?;
        let g = groups
            .entry((source_order(&report.source), rec.slot, origin))
            .or_insert_with(|| (report.source.clone(), BTreeSet::new(), 0));
        g.1.insert(&rec.target);
        g.2 += 1;
        targets.insert(rec.target.as_str());
    }
    let rows: Vec<CompletionRow> = groups
        .into_iter()
        .map(|((_, slot, origin), (source, pocs, n))| CompletionRow {
            source: Some(source),
            slot,
            origin,
            pocs_completed: pocs.len(),
            aspects_completed: n,
        })
        .collect();
    let mut sums: BTreeMap<(Aspect, OriginKind), (usize, usize)> = BTreeMap::new();
    for r in &rows {
        let s = sums.entry((r.slot, r.origin)).or_default();
        s.0 += r.pocs_completed;
        s.1 += r.aspects_completed;
    }
    let overall = sums
        .into_iter()
        .map(|((slot, origin), (p, a))| CompletionRow {
            source: None,
            slot,
            origin,
            pocs_completed: p,
            aspects_completed: a,
        })
        .collect();
    Ok(CompletionTable {
        rows,
        overall,
        total_pocs_completed: targets.len(),
        total_aspects_completed: records.len(),
    })
}

/// A table with a fixed header and string cells.
pub trait Tabular {
    fn header(&self) -> &'static [&'static str];
    fn cells(&self) -> Vec<Vec<String>>;
}

fn source_cell(s: &Option<SourceId>) -> String {
    s.as_ref().map_or_else(|| "all".to_string(), |s| s.label().to_string())
}

fn rate_cell(r: f64) -> String {
    format!("{r:.4}")
}

impl Tabular for DeficiencyTable {
    fn header(&self) -> &'static [&'static str] {
        &["source", "aspect", "present", "total", "presence_rate"]
    }

    fn cells(&self) -> Vec<Vec<String>> {
        if self.empty {
            return Vec::new();
        }
        let mut out = Vec::new();
        for sd in self.per_source.iter().chain([&self.overall]) {
            let src = source_cell(&sd.source);
            for (aspect, p) in Aspect::ALL.iter().zip(&sd.aspects) {
                out.push(vec![
                    src.clone(),
                    aspect.name().to_string(),
                    p.present.to_string(),
                    p.total.to_string(),
                    rate_cell(p.rate),
                ]);
            }
            out.push(vec![src, "mean".into(), String::new(), String::new(), rate_cell(sd.mean)]);
        }
        out
    }
}

impl Tabular for CompletionTable {
    fn header(&self) -> &'static [&'static str] {
        &["source", "slot", "origin", "pocs_completed", "aspects_completed"]
    }

    fn cells(&self) -> Vec<Vec<String>> {
        if self.rows.is_empty() {
            return Vec::new();
        }
        let mut out: Vec<Vec<String>> = self
            .rows
            .iter()
            .chain(&self.overall)
            .map(|r| {
                vec![
                    source_cell(&r.source),
                    r.slot.name().to_string(),
                    r.origin.name().to_string(),
                    r.pocs_completed.to_string(),
                    r.aspects_completed.to_string(),
                ]
            })
            .collect();
        out.push(vec![
            "all".into(),
            "all".into(),
            "all".into(),
            self.total_pocs_completed.to_string(),
            self.total_aspects_completed.to_string(),
        ]);
        out
    }
}

pub fn render_report(table: &dyn Tabular, format: ReportFormat) -> String {
    let header = table.header();
    let rows = table.cells();
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            w.write_record(header).expect("writing to memory");
            for r in &rows {
                w.write_record(r).expect("writing to memory");
            }
            String::from_utf8(w.into_inner().expect("flushing to memory")).expect("cells are UTF-8")
        }
        ReportFormat::Markdown => {
            let escape = |c: &str| c.replace('|', "\\|");
            let mut out = format!("| {} |\n", header.join(" | "));
            out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            for r in &rows {
                let cells: Vec<String> = r.iter().map(|c| escape(c)).collect();
                out.push_str(&format!("| {} |\n", cells.join(" | ")));
            }
            out
        }
    }
}
