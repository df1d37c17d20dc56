//! Plugs a custom structured extractor into the extraction stage. This one
//! only reports the document's first line as its title, so the header slots it
//! leaves empty stay empty. A failing extractor falls back to the header
//! patterns.
//!
//! cargo run -p pocfuse --example external_extractor

use pocfuse::classify::categorize;
use pocfuse::corpus::{Aspect, PocReport, SourceId};
use pocfuse::extract::{
    extract_all, extract_structured_aspects, ExtractorError, Rules, Span, StructuredExtraction, StructuredExtractor,
};

struct FirstLineTitle;

impl StructuredExtractor for FirstLineTitle {
    fn name(&self) -> &str {
        "first-line"
    }

    fn extract(&self, report: &PocReport) -> Result<StructuredExtraction, ExtractorError> {
        let line = report.raw_content.lines().next().unwrap_or("").trim_end();
        let mut out = StructuredExtraction::default();
        if !line.is_empty() {
            out.slots.entry(Aspect::Title).or_default().push(Span { text: line.to_string(), start: 0, end: line.chars().count() });
        }
        Ok(out)
    }
}

struct AlwaysDown;

impl StructuredExtractor for AlwaysDown {
    fn name(&self) -> &str {
        "down"
    }

    fn extract(&self, _: &PocReport) -> Result<StructuredExtraction, ExtractorError> {
        Err(ExtractorError::Unreachable("connection refused".into()))
    }
}

fn main() -> pocfuse::Result<()> {
    let doc = "Gadget Server 1.2 Path Traversal\nAuthor: lee\nDate: 2019-07-01\n\nGET /../../etc/passwd reads arbitrary files.\n";
    let report = categorize(&PocReport::new("ps-9", SourceId::PacketStorm, doc))?;

    let done = extract_all(&report, &Rules::default(), &FirstLineTitle)?;
    for aspect in [Aspect::Title, Aspect::Author, Aspect::PublishTime] {
        let values: Vec<&str> = done.report.aspects.get(aspect).iter().map(|v| v.text()).collect();
        println!("{:<13} {values:?}", aspect.name());
    }

    let fallback = extract_structured_aspects(&report, &AlwaysDown);
    println!("degradation: {:?}", fallback.degradation);
    println!("fallback title: {:?}", fallback.extraction.get(Aspect::Title).first().map(|s| &s.text));
    Ok(())
}
