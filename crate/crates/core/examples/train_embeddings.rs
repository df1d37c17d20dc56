//! Trains skip-gram embeddings on the demo prose reports, then compares two
//! of them by averaged word vectors.
//!
//! cargo run -p pocfuse --example train_embeddings

use std::path::PathBuf;

use pocfuse::classify::categorize;
use pocfuse::corpus::{ingest_reports, ContentKind, SourceId};
use pocfuse::similarity::{embed_text, train_embeddings, EmbeddingParams};

fn main() -> pocfuse::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/demo");
    let mut texts = Vec::new();
    for (file, source) in [
        ("exploitdb.jsonl", SourceId::ExploitDb),
        ("packetstorm.jsonl", SourceId::PacketStorm),
        ("seebug.jsonl", SourceId::Seebug),
        ("cxsecurity.jsonl", SourceId::CxSecurity),
    ] {
        for r in ingest_reports(&dir.join(file), &source)?.items {
            let r = categorize(&r)?;
            if r.content_kind == ContentKind::Text {
                texts.push((r.id, r.raw_content));
            }
        }
    }
    let params = EmbeddingParams {
        dim: 32,
        epochs: 60,
        min_count: 1,
        seed: 42,
        ..EmbeddingParams::default()
    };
    let contents: Vec<&str> = texts.iter().map(|(_, c)| c.as_str()).collect();
    let (model, report) = train_embeddings(&contents, &params)?;
    println!("{} prose reports, vocabulary {}", texts.len(), model.vocabulary().len());
    for (epoch, loss) in report.epoch_losses.iter().enumerate().step_by(10) {
        println!("epoch {:>2} loss {loss:.3}", epoch + 1);
    }
    let docs: Vec<_> = contents.iter().map(|t| embed_text(&model, t)).collect();
    for i in 1..docs.len() {
        println!("{} vs {}: {:.4}", texts[0].0, texts[i].0, docs[0].cosine(&docs[i]).value);
    }
    Ok(())
}
