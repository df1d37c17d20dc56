//! Detect missing key aspects in vulnerability proof-of-concept reports and
//! complete them from CVE entries and from related reports on other platforms.
//!
//! Stages, each usable on its own:
//!
//! - [`corpus`]: report and CVE ingestion, the domain types, persistence.
//! - [`classify`]: code-or-prose categorization with language detection.
//! - [`extract`]: rule-based and structured aspect extraction, CVE ids.
//! - [`similarity`]: token-frequency and skip-gram representations, cosine.
//! - [`link`]: the cross-source link graph and pair training sets.
//! - [`complete`]: CVE- and PoC-based completion with audit records.
//! - [`report`]: deficiency and completion tables.
//! - [`pipeline`]: the staged workspace driver behind the `pocfuse` binary.

pub mod classify;
pub mod complete;
pub mod corpus;
pub mod error;
pub mod extract;
pub mod link;
pub mod pipeline;
pub mod report;
pub mod similarity;

pub use error::{Error, Result};
