//! Core domain types, ingestion of report/CVE files, and corpus persistence.

mod ingest;
mod store;
mod types;

pub use ingest::{ingest_cve_entries, ingest_reports, merge_batches, IngestWarning, Ingested};
pub use store::{
    corpus_from_bytes, corpus_to_bytes, cve_db_from_bytes, cve_db_to_bytes, load_corpus, load_cve_db,
    save_corpus, save_cve_db, CORPUS_FORMAT, CORPUS_VERSION, CVE_DB_FORMAT, CVE_DB_VERSION,
};
pub(crate) use store::{from_container_bytes, to_container_bytes, write_file};
pub(crate) use types::push_unique;
pub use types::{
    normalized, Aspect, AspectSet, AspectValue, Category, ContentKind, Corpus, CveDb, CveEntry,
    PocReport, Product, Provenance, SourceId,
};
