//! Loads the demo ExploitDB dump and prints each report's detected kind.
//!
//! cargo run -p pocfuse --example ingest_and_classify

use std::path::PathBuf;

use pocfuse::classify::categorize;
use pocfuse::corpus::{ingest_reports, SourceId};

fn main() -> pocfuse::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/demo/exploitdb.jsonl");
    let got = ingest_reports(&path, &SourceId::ExploitDb)?;
    for w in &got.warnings {
        println!("warning: {w}");
    }
    for report in &got.items {
        let r = categorize(report)?;
        println!("{:<12} {:?}", r.id, r.content_kind);
    }
    Ok(())
}
