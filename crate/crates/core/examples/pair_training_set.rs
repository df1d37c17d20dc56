//! Builds a labelled pair set for training an external same-vulnerability
//! classifier and prints its partition sizes.
//!
//! cargo run -p pocfuse --example pair_training_set

use std::path::PathBuf;

use pocfuse::classify::categorize;
use pocfuse::corpus::{ingest_reports, Corpus, SourceId};
use pocfuse::extract::{extract_all, PatternExtractor, Rules};
use pocfuse::link::{build_pair_training_set, PairLabel, SplitRatios};

fn main() -> pocfuse::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/demo");
    let mut reports = Vec::new();
    for (file, source) in [("exploitdb.jsonl", SourceId::ExploitDb), ("seebug.jsonl", SourceId::Seebug)] {
        for r in ingest_reports(&dir.join(file), &source)?.items {
            reports.push(extract_all(&categorize(&r)?, &Rules::default(), &PatternExtractor)?.report);
        }
    }
    let corpus = Corpus::new(reports)?;
    let set = build_pair_training_set(&corpus, 3, 6, SplitRatios::default(), 7)?;
    for (partition, samples) in set.partitions() {
        let same = samples.iter().filter(|s| s.label == PairLabel::SameVulnerability).count();
        println!("{partition:?}: {} pairs, {same} same-vulnerability", samples.len());
        for s in samples {
            println!("  {} / {} {:?} software_match={}", s.a, s.b, s.label, s.features.software_match);
        }
    }
    Ok(())
}
