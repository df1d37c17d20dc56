//! Fills missing aspects from linked CVE entries and related reports.
//!
//! A run has two passes. Pass 1 appends CVE versions and platforms to every
//! report whose software names agree with the entry's products. Pass 2 walks
//! the link graph by descending similarity (ties by pair key) and copies a
//! donor's original values into the target's empty slots, both directions per
//! link. Donors only ever offer original values, so nothing propagates in
//! chains and a second run finds nothing left to do.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{corpus_to_bytes, Aspect, AspectValue, Corpus, CveDb, CveEntry, PocReport, Provenance};
use crate::error::{Error, Result};
use crate::link::{links_to_jsonl, LinkBasis, PocLink, Thresholds};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionConfig {
    pub code_threshold: f64,
    pub text_threshold: f64,
    /// Slots that related reports may fill.
    pub poc_aspect_whitelist: BTreeSet<Aspect>,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        let t = Thresholds::default();
        CompletionConfig {
            code_threshold: t.code,
            text_threshold: t.text,
            poc_aspect_whitelist: Aspect::ALL.into_iter().collect(),
        }
    }
}

impl CompletionConfig {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            code: self.code_threshold,
            text: self.text_threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.thresholds().validate()
    }

    fn admits(&self, link: &PocLink) -> bool {
        match link.basis {
            LinkBasis::SharedCve { .. } => link.similarity >= self.thresholds().for_kind(link.kind),
            LinkBasis::Classifier => true,
        }
    }
}

/// One value added to one slot of one report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub run_id: String,
    pub target: String,
    pub slot: Aspect,
    pub value: String,
    pub origin: Provenance,
}

/// True when the report names no software, or one of its names and one of
/// the entry's products contain each other (case-insensitive).
pub fn verify_association(report: &PocReport, entry: &CveEntry) -> bool {
    report.software.is_empty() || !matching_products(report, entry).is_empty()
}

fn names_match(software: &str, product: &str) -> bool {
    let s = software.trim().to_lowercase();
    let p = product.trim().to_lowercase();
    !s.is_empty() && !p.is_empty() && (s.contains(&p) || p.contains(&s))
}

fn matching_products<'e>(report: &PocReport, entry: &'e CveEntry) -> Vec<&'e crate::corpus::Product> {
    entry
        .products
        .iter()
        .filter(|p| report.software.iter().any(|s| names_match(s, &p.name)))
        .collect()
}

fn push_record(
    report: &mut PocReport,
    slot: Aspect,
    text: &str,
    origin: &Provenance,
    run_id: &str,
    records: &mut Vec<CompletionRecord>,
) -> Result<()> {
    let value = AspectValue::new(text, origin.clone())?;
    let stored = value.text().to_string();
    if report.aspects.push(slot, value) {
        records.push(CompletionRecord {
            run_id: run_id.to_string(),
            target: report.id.clone(),
            slot,
            value: stored,
            origin: origin.clone(),
        });
    }
    Ok(())
}

/// Appends the entry's missing versions and platforms. Versions come from the
/// products matching the report's software names, or from every product when
/// the report names none.
pub fn complete_from_cve(
    report: &PocReport,
    entry: &CveEntry,
    run_id: &str,
) -> Result<(PocReport, Vec<CompletionRecord>)> {
    if !report.cve_ids.contains(&entry.cve_id) {
        return Err(Error::Precondition(format!(
            "report {} does not carry {}",
            report.id, entry.cve_id
        )));
    }
    if !verify_association(report, entry) {
        return Err(Error::Precondition(format!(
            "report {} software {:?} matches no product of {}",
            report.id, report.software, entry.cve_id
        )));
    }
    let versions: Vec<&str> = if report.software.is_empty() {
        entry.all_versions()
    } else {
        matching_products(report, entry)
            .into_iter()
            .flat_map(|p| p.versions.iter().map(String::as_str))
            .collect()
    };
    let origin = Provenance::FromCve {
        cve_id: entry.cve_id.clone(),
    };
    let mut out = report.clone();
    let mut records = Vec::new();
    for v in versions.into_iter().filter(|v| !v.trim().is_empty()) {
        push_record(&mut out, Aspect::SoftwareVersion, v, &origin, run_id, &mut records)?;
    }
    for p in entry.platforms.iter().filter(|p| !p.trim().is_empty()) {
        push_record(&mut out, Aspect::TestPlatform, p, &origin, run_id, &mut records)?;
    }
    Ok((out, records))
}

/// Copies the donor's original values into the target's empty whitelisted
/// slots.
pub fn complete_from_poc(
    target: &PocReport,
    donor: &PocReport,
    link: &PocLink,
    config: &CompletionConfig,
    run_id: &str,
) -> Result<(PocReport, Vec<CompletionRecord>)> {
    if link.other(&target.id) != Some(donor.id.as_str()) {
        return Err(Error::Precondition(format!(
            "link {}/{} does not connect {} and {}",
            link.a, link.b, target.id, donor.id
        )));
    }
    if !config.admits(link) {
        return Err(Error::Precondition(format!(
            "link {}/{} similarity {} is below the {:?} threshold",
            link.a, link.b, link.similarity, link.kind
        )));
    }
    let origin = Provenance::FromPoc {
        donor: donor.id.clone(),
        similarity: link.similarity,
        basis: link.basis.clone(),
    };
    let mut out = target.clone();
    let mut records = Vec::new();
    for slot in Aspect::ALL {
        if !config.poc_aspect_whitelist.contains(&slot) || !out.aspects.is_missing(slot) {
            continue;
        }
        for v in donor.aspects.originals(slot) {
            push_record(&mut out, slot, v.text(), &origin, run_id, &mut records)?;
        }
    }
    Ok((out, records))
}

#[derive(Debug, Clone)]
pub struct CompletionRun {
    pub run_id: String,
    pub corpus: Corpus,
    pub records: Vec<CompletionRecord>,
}

/// Content hash of everything a run depends on.
pub fn compute_run_id(corpus: &Corpus, cve_db: &CveDb, links: &[PocLink], config: &CompletionConfig) -> String {
    let mut h = Sha256::new();
    for part in [
        corpus_to_bytes(corpus),
        serde_json::to_vec(cve_db).expect("cve db serializes"),
        links_to_jsonl(links).into_bytes(),
        serde_json::to_vec(config).expect("config serializes"),
    ] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(&part);
    }
    hex::encode(&h.finalize()[..8])
}

pub fn run_completion(
    corpus: &Corpus,
    cve_db: &CveDb,
    links: &[PocLink],
    config: &CompletionConfig,
) -> Result<CompletionRun> {
    config.validate()?;
    for l in links {
        for id in [&l.a, &l.b] {
            if corpus.get(id).is_none() {
                return Err(Error::UnknownReport(id.clone()));
            }
        }
    }
    let run_id = compute_run_id(corpus, cve_db, links, config);

    // Pass 1, independent per report.
    let pass1 = corpus
        .reports()
        .par_iter()
        .map(|report| {
            let mut current = report.clone();
            let mut records = Vec::new();
            for cve in &report.cve_ids {
                let Some(entry) = cve_db.get(cve) else { continue };
                if !verify_association(&current, entry) {
                    continue;
                }
                let (next, recs) = complete_from_cve(&current, entry, &run_id)?;
                current = next;
                records.extend(recs);
            }
            Ok((current, records))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut reports = Vec::with_capacity(pass1.len());
    for (r, recs) in pass1 {
        reports.push(r);
        records.extend(recs);
    }
    let mut enriched = Corpus::new(reports)?;

    // Pass 2, sequential; donors read from the input snapshot.
    let mut ordered: Vec<&PocLink> = links.iter().filter(|l| config.admits(l)).collect();
    ordered.sort_by(|x, y| y.similarity.total_cmp(&x.similarity).then_with(|| x.key().cmp(&y.key())));
    for link in ordered {
        for (t, d) in [(&link.a, &link.b), (&link.b, &link.a)] {
            let donor = corpus.get(d).expect("checked above");
            let target = enriched.get(t).expect("checked above");
            let (next, recs) = complete_from_poc(target, donor, link, config, &run_id)?;
            if !recs.is_empty() {
                *enriched.report_mut(t).expect("checked above") = next;
                records.extend(recs);
            }
        }
    }
    Ok(CompletionRun {
        run_id,
        corpus: enriched,
        records,
    })
}

/// Re-applies records, in order, to the corpus they were produced from.
pub fn replay(corpus: &Corpus, records: &[CompletionRecord]) -> Result<Corpus> {
    let mut out = corpus.clone();
    for rec in records {
        let report = out
            .report_mut(&rec.target)
            .ok_or_else(|| Error::UnknownReport(rec.target.clone()))?;
        if rec.origin.is_original() {
            return Err(Error::Invalid(format!("record for {} claims original provenance", rec.target)));
        }
        let value = AspectValue::new(&rec.value, rec.origin.clone())?;
        if !report.aspects.push(rec.slot, value) {
            return Err(Error::Invalid(format!(
                "record {:?} for {} {} is already present",
                rec.value, rec.target, rec.slot
            )));
        }
    }
    Ok(out)
}

/// One record per line, fields in declaration order.
pub fn records_to_jsonl(records: &[CompletionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn records_from_jsonl(path: &std::path::Path, text: &str) -> Result<Vec<CompletionRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}
