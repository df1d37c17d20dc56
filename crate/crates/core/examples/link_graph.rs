//! Builds the cross-source link graph for the demo corpus: shared-CVE pairs
//! above threshold plus heuristic classifier links.
//!
//! cargo run -p pocfuse --example link_graph

use std::path::PathBuf;

use pocfuse::classify::categorize;
use pocfuse::corpus::{ingest_reports, ContentKind, Corpus, SourceId};
use pocfuse::extract::{extract_all, PatternExtractor, Rules};
use pocfuse::link::{build_link_graph, ClassifierSetup, HeuristicClassifier, SimilarityModels, Thresholds};
use pocfuse::similarity::{train_embeddings, EmbeddingParams};

fn main() -> pocfuse::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/demo");
    let rules = Rules::default();
    let mut reports = Vec::new();
    for (file, source) in [
        ("exploitdb.jsonl", SourceId::ExploitDb),
        ("packetstorm.jsonl", SourceId::PacketStorm),
        ("seebug.jsonl", SourceId::Seebug),
        ("cxsecurity.jsonl", SourceId::CxSecurity),
    ] {
        for r in ingest_reports(&dir.join(file), &source)?.items {
            reports.push(extract_all(&categorize(&r)?, &rules, &PatternExtractor)?.report);
        }
    }
    let corpus = Corpus::new(reports)?;

    let texts: Vec<&str> = corpus
        .reports()
        .iter()
        .filter(|r| r.content_kind == ContentKind::Text)
        .map(|r| r.raw_content.as_str())
        .collect();
    let params = EmbeddingParams { dim: 32, epochs: 10, min_count: 1, seed: 42, ..EmbeddingParams::default() };
    let (model, _) = train_embeddings(&texts, &params)?;

    let heuristic = HeuristicClassifier::default();
    let setup = ClassifierSetup { classifier: &heuristic, fallback: &heuristic };
    let models = SimilarityModels { embeddings: Some(&model) };
    let graph = build_link_graph(&corpus, &models, Some(&setup), &Thresholds::default())?;
    for l in &graph.links {
        println!("{:<16} {:<16} {:?} {:.4} {:?}", l.a, l.b, l.kind, l.similarity, l.basis);
    }
    println!("{} links", graph.links.len());
    Ok(())
}
