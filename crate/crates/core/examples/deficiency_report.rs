//! Prints the per-source presence table for the extracted demo corpus, in
//! both output formats.
//!
//! cargo run -p pocfuse --example deficiency_report

use std::path::PathBuf;

use pocfuse::classify::categorize;
use pocfuse::corpus::{ingest_reports, Corpus, SourceId};
use pocfuse::extract::{extract_all, PatternExtractor, Rules};
use pocfuse::report::{deficiency_stats, render_report, ReportFormat};

fn main() -> pocfuse::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/demo");
    let mut reports = Vec::new();
    for (file, source) in [
        ("exploitdb.jsonl", SourceId::ExploitDb),
        ("packetstorm.jsonl", SourceId::PacketStorm),
        ("seebug.jsonl", SourceId::Seebug),
        ("cxsecurity.jsonl", SourceId::CxSecurity),
    ] {
        for r in ingest_reports(&dir.join(file), &source)?.items {
            reports.push(extract_all(&categorize(&r)?, &Rules::default(), &PatternExtractor)?.report);
        }
    }
    let table = deficiency_stats(&Corpus::new(reports)?);
    println!("{}", render_report(&table, ReportFormat::Markdown));
    println!("{}", render_report(&table, ReportFormat::Csv));
    Ok(())
}
