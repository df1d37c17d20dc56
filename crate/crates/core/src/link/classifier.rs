//! Same-vulnerability verdicts for report pairs.
//!
//! External service wire format:
//!
//! ```text
//! request:  {"title_a": "...", "content_a": "...", "title_b": "...", "content_b": "..."}
//! response: {"same": true, "confidence": 0.93}
//! ```

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::match_software;
use crate::corpus::PocReport;
use crate::error::{Error, Result};
use crate::similarity::{cosine_sparse, text_tokens};

pub const DEFAULT_CLASSIFIER_DEADLINE: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub same: bool,
    pub confidence: f64,
}

#[derive(Debug, Clone, Error)]
pub enum ClassifierError {
    #[error("classifier unreachable: {0}")]
    Unreachable(String),
    #[error("classifier broke its contract: {0}")]
    Contract(String),
}

pub trait PairClassifier: Send + Sync {
    fn name(&self) -> &str;
    fn classify(&self, a: &PocReport, b: &PocReport) -> Result<PairVerdict, ClassifierError>;
}

/// Weighted title and content bag-of-words cosine; the confidence is the
/// combined cosine itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicClassifier {
    pub cutoff: f64,
    pub title_weight: f64,
    pub content_weight: f64,
}

impl Default for HeuristicClassifier {
    fn default() -> Self {
        HeuristicClassifier {
            cutoff: 0.85,
            title_weight: 0.5,
            content_weight: 0.5,
        }
    }
}

fn bag(text: &str) -> BTreeMap<String, u32> {
    let mut m = BTreeMap::new();
    for t in text_tokens(text) {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

impl HeuristicClassifier {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.cutoff)
            && self.title_weight >= 0.0
            && self.content_weight >= 0.0
            && (self.title_weight + self.content_weight - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "classifier cutoff must be in [0, 1] and weights must be non-negative and sum to 1 (got {self:?})"
            )))
        }
    }

    pub fn confidence(&self, a: &PocReport, b: &PocReport) -> f64 {
        let title = cosine_sparse(&bag(a.title().unwrap_or("")), &bag(b.title().unwrap_or(""))).value;
        let content = cosine_sparse(&bag(&a.raw_content), &bag(&b.raw_content)).value;
        (self.title_weight * title + self.content_weight * content).clamp(0.0, 1.0)
    }
}

impl PairClassifier for HeuristicClassifier {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn classify(&self, a: &PocReport, b: &PocReport) -> Result<PairVerdict, ClassifierError> {
        let confidence = self.confidence(a, b);
        Ok(PairVerdict {
            same: confidence >= self.cutoff,
            confidence,
        })
    }
}

pub struct HttpClassifier {
    url: String,
    agent: ureq::Agent,
}

impl HttpClassifier {
    pub fn new(url: impl Into<String>, deadline: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(deadline))
            .build()
            .into();
        HttpClassifier { url: url.into(), agent }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    title_a: &'a str,
    content_a: &'a str,
    title_b: &'a str,
    content_b: &'a str,
}

impl PairClassifier for HttpClassifier {
    fn name(&self) -> &str {
        "http"
    }

    fn classify(&self, a: &PocReport, b: &PocReport) -> Result<PairVerdict, ClassifierError> {
        let request = WireRequest {
            title_a: a.title().unwrap_or(""),
            content_a: &a.raw_content,
            title_b: b.title().unwrap_or(""),
            content_b: &b.raw_content,
        };
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(&request)
            .map_err(|e| ClassifierError::Unreachable(e.to_string()))?;
        response
            .body_mut()
            .read_json()
            .map_err(|e| ClassifierError::Contract(format!("bad response body: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOutcome {
    pub verdict: PairVerdict,
    /// Set when `fallback` answered instead of the requested classifier.
    pub degradation: Option<String>,
}

/// Requires a software-name match; a failing or misbehaving classifier is
/// replaced by `fallback`.
pub fn classify_pair(
    classifier: &dyn PairClassifier,
    fallback: &HeuristicClassifier,
    a: &PocReport,
    b: &PocReport,
) -> Result<ClassifyOutcome> {
    if !match_software(a, b) {
        return Err(Error::Precondition(format!(
            "reports {} and {} share no software name",
            a.id, b.id
        )));
    }
    let checked = classifier.classify(a, b).and_then(|v| {
        if (0.0..=1.0).contains(&v.confidence) {
            Ok(v)
        } else {
            Err(ClassifierError::Contract(format!("confidence {} outside [0, 1]", v.confidence)))
        }
    });
    match checked {
        Ok(verdict) => Ok(ClassifyOutcome {
            verdict,
            degradation: None,
        }),
        Err(e) => {
            log::warn!("{} classifier failed on {}/{}: {e}; using heuristic", classifier.name(), a.id, b.id);
            let verdict = fallback.classify(a, b).expect("heuristic classifier is infallible");
            Ok(ClassifyOutcome {
                verdict,
                degradation: Some(e.to_string()),
            })
        }
    }
}
