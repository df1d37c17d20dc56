//! Key-aspect extraction: rule-based matching for trigger steps, verification
//! oracles and references; CVE ids by per-source strategy; the remaining
//! slots through a pluggable [`StructuredExtractor`].

mod cve;
mod eval;
mod rules;
mod structured;

pub use cve::{extract_cve_ids, normalize_cve_id, scan_cve_ids, SourceStrategy};
pub use eval::{evaluate_extraction, gold_from_corpus, load_gold, ExtractionScore, GoldRecord, GoldSet, SlotCounts};
pub use rules::{extract_references, extract_trigger_step, extract_verification_oracle, RuleSet, Rules};
pub use structured::{
    extract_structured_aspects, ExtractorError, HttpExtractor, PatternExtractor, Span, StructuredExtraction,
    StructuredExtractor, StructuredOutcome, DEFAULT_EXTRACTOR_DEADLINE, EXTRACTOR_SCHEMA_VERSION,
};

use crate::corpus::{push_unique, Aspect, AspectValue, ContentKind, PocReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Extracted {
    pub report: PocReport,
    pub degradation: Option<String>,
}

/// Fills all eight slots of a categorized report with original values.
/// Values already present (e.g. from ingestion) are kept and not duplicated.
pub fn extract_all(report: &PocReport, rules: &Rules, extractor: &dyn StructuredExtractor) -> Result<Extracted> {
    if report.content_kind == ContentKind::Unclassified {
        return Err(Error::Precondition(format!(
            "report {} must be categorized before extraction",
            report.id
        )));
    }
    let mut out = report.clone();
    let content = report.raw_content.as_str();

    let mut push_all = |aspect: Aspect, values: Vec<String>| {
        for v in values {
            if let Ok(value) = AspectValue::original(&v) {
                out.aspects.push(aspect, value);
            }
        }
    };
    push_all(Aspect::TriggerStep, extract_trigger_step(content, rules));
    push_all(Aspect::VerificationOracle, extract_verification_oracle(content, rules));
    push_all(Aspect::Reference, extract_references(content, rules));

    let structured = extract_structured_aspects(report, extractor);
    for aspect in Aspect::STRUCTURED {
        push_all(
            aspect,
            structured.extraction.get(aspect).iter().map(|s| s.text.clone()).collect(),
        );
    }

    let strategy = SourceStrategy::for_source(&report.source);
    for id in extract_cve_ids(report, &strategy) {
        out.add_cve_id(&id)?;
    }

    for span in &structured.extraction.software {
        push_unique(&mut out.software, span.text.clone());
    }
    let implied: Vec<String> = [Aspect::Title, Aspect::SoftwareVersion]
        .into_iter()
        .flat_map(|a| out.aspects.originals(a))
        .filter_map(|v| structured::software_prefix(v.text()).map(|(s, e)| v.text()[s..e].to_string()))
        .collect();
    for name in implied {
        push_unique(&mut out.software, name);
    }

    Ok(Extracted {
        report: out,
        degradation: structured.degradation,
    })
}
