//! Cross-source association graph.
//!
//! Reports sharing a CVE id are paired within the same content kind and
//! language and kept when their similarity reaches the per-kind threshold.
//! Pairs that share no CVE id can still be linked by a pair classifier, gated
//! on an exact software-name match.

mod classifier;
mod training;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::LanguageId;
use crate::corpus::{normalized, ContentKind, Corpus, PocReport};
use crate::error::{Error, Result};
use crate::similarity::{cosine_similarity, embed_text, tokenize_code, DocVector, EmbeddingModel, TokenFrequencyVector};

pub use classifier::{
    classify_pair, ClassifierError, ClassifyOutcome, HeuristicClassifier, HttpClassifier, PairClassifier, PairVerdict,
    DEFAULT_CLASSIFIER_DEADLINE,
};
pub use training::{
    build_pair_training_set, pair_training_set_to_jsonl, PairFeatures, PairLabel, PairSample, PairTrainingSet,
    Partition, SplitRatios,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LinkBasis {
    SharedCve { cve_id: String },
    Classifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "lang", rename_all = "snake_case")]
pub enum PairKind {
    CodePair(LanguageId),
    TextPair,
}

impl PairKind {
    /// The pair kind two reports form, if they are comparable at all.
    pub fn of(a: ContentKind, b: ContentKind) -> Option<PairKind> {
        match (a, b) {
            (ContentKind::Code(x), ContentKind::Code(y)) if x == y => Some(PairKind::CodePair(x)),
            (ContentKind::Text, ContentKind::Text) => Some(PairKind::TextPair),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PocLink {
    pub a: String,
    pub b: String,
    pub basis: LinkBasis,
    pub similarity: f64,
    pub kind: PairKind,
}

impl PocLink {
    /// Orders the endpoints canonically and validates the similarity.
    pub fn new(x: &str, y: &str, basis: LinkBasis, similarity: f64, kind: PairKind) -> Result<PocLink> {
        if x == y {
            return Err(Error::Invalid(format!("self link on {x:?}")));
        }
        if !(0.0..=1.0).contains(&similarity) {
            return Err(Error::Invalid(format!("link similarity {similarity} outside [0, 1]")));
        }
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        Ok(PocLink {
            a: a.to_string(),
            b: b.to_string(),
            basis,
            similarity,
            kind,
        })
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.a, &self.b)
    }

    /// The endpoint opposite `id`.
    pub fn other(&self, id: &str) -> Option<&str> {
        if self.a == id {
            Some(&self.b)
        } else if self.b == id {
            Some(&self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub code: f64,
    pub text: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { code: 0.5, text: 0.95 }
    }
}

impl Thresholds {
    pub fn for_kind(&self, kind: PairKind) -> f64 {
        match kind {
            PairKind::CodePair(_) => self.code,
            PairKind::TextPair => self.text,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("code", self.code), ("text", self.text)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Invalid(format!("{name} threshold {t} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// CVE id → ids of the reports carrying it, in corpus order.
pub fn group_by_cve(corpus: &Corpus) -> BTreeMap<String, Vec<String>> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in corpus.reports() {
        for cve in &r.cve_ids {
            groups.entry(cve.clone()).or_default().push(r.id.clone());
        }
    }
    groups
}

/// All comparable unordered pairs in a group, endpoints in canonical order.
pub fn candidate_pairs_same_cve(group: &[String], corpus: &Corpus) -> Result<Vec<(String, String, PairKind)>> {
    let reports = group
        .iter()
        .map(|id| corpus.get(id).ok_or_else(|| Error::UnknownReport(id.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (i, x) in reports.iter().enumerate() {
        for y in &reports[i + 1..] {
            if x.id == y.id {
                continue;
            }
            if let Some(kind) = PairKind::of(x.content_kind, y.content_kind) {
                let (a, b) = if x.id < y.id { (x, y) } else { (y, x) };
                out.push((a.id.clone(), b.id.clone(), kind));
            }
        }
    }
    Ok(out)
}

/// Representation each report is compared through.
#[derive(Debug, Clone)]
pub enum Representation {
    Code(TokenFrequencyVector),
    Text(DocVector),
    None,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimilarityModels<'a> {
    /// Without a model every text pair scores 0 and is flagged degenerate.
    pub embeddings: Option<&'a EmbeddingModel>,
}

impl SimilarityModels<'_> {
    pub fn represent(&self, report: &PocReport) -> Representation {
        match report.content_kind {
            ContentKind::Code(lang) => Representation::Code(tokenize_code(&report.raw_content, lang)),
            ContentKind::Text => match self.embeddings {
                Some(m) => Representation::Text(embed_text(m, &report.raw_content)),
                None => Representation::Text(DocVector {
                    values: Vec::new(),
                    all_oov: true,
                }),
            },
            _ => Representation::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScore {
    pub value: f64,
    pub degenerate: bool,
    /// A negative text cosine was raised to 0.
    pub clamped: bool,
}

fn score_representations(x: &Representation, y: &Representation, kind: PairKind) -> Result<PairScore> {
    match (kind, x, y) {
        (PairKind::CodePair(_), Representation::Code(a), Representation::Code(b)) => {
            let c = cosine_similarity(a, b);
            Ok(PairScore {
                value: c.value.clamp(0.0, 1.0),
                degenerate: c.degenerate,
                clamped: false,
            })
        }
        (PairKind::TextPair, Representation::Text(a), Representation::Text(b)) => {
            if a.values.is_empty() || b.values.is_empty() {
                return Ok(PairScore {
                    value: 0.0,
                    degenerate: true,
                    clamped: false,
                });
            }
            let c = a.cosine(b);
            Ok(PairScore {
                value: c.value.max(0.0),
                degenerate: c.degenerate,
                clamped: c.value < 0.0,
            })
        }
        _ => Err(Error::Precondition(format!("reports do not form a {kind:?}"))),
    }
}

/// Similarity of two reports under `kind`.
pub fn score_pair(a: &PocReport, b: &PocReport, kind: PairKind, models: &SimilarityModels) -> Result<PairScore> {
    if PairKind::of(a.content_kind, b.content_kind) != Some(kind) {
        return Err(Error::Precondition(format!(
            "reports {} and {} do not form a {kind:?}",
            a.id, b.id
        )));
    }
    score_representations(&models.represent(a), &models.represent(b), kind)
}

/// Exact (case-insensitive, trimmed) software-name match.
pub fn match_software(a: &PocReport, b: &PocReport) -> bool {
    a.software
        .iter()
        .any(|x| b.software.iter().any(|y| normalized(x) == normalized(y)))
}

/// Pair classifier plus the heuristic used when it fails.
pub struct ClassifierSetup<'a> {
    pub classifier: &'a dyn PairClassifier,
    pub fallback: &'a HeuristicClassifier,
}

#[derive(Debug, Clone, Default)]
pub struct LinkGraph {
    /// Sorted by canonical pair key.
    pub links: Vec<PocLink>,
    pub degradations: Vec<String>,
}

/// Builds the link graph. Without a classifier only shared-CVE links are made.
pub fn build_link_graph(
    corpus: &Corpus,
    models: &SimilarityModels,
    classifier: Option<&ClassifierSetup>,
    thresholds: &Thresholds,
) -> Result<LinkGraph> {
    thresholds.validate()?;
    let reps: Vec<Representation> = corpus.reports().par_iter().map(|r| models.represent(r)).collect();
    let rep_of = |id: &str| &reps[corpus.position(id).expect("candidate ids come from the corpus")];

    // Lowest CVE id wins as the recorded basis when a pair shares several.
    let mut shared: BTreeMap<(String, String), (String, PairKind)> = BTreeMap::new();
    for (cve, group) in group_by_cve(corpus) {
        for (a, b, kind) in candidate_pairs_same_cve(&group, corpus)? {
            shared.entry((a, b)).or_insert((cve.clone(), kind));
        }
    }
    let shared_pairs: Vec<_> = shared.into_iter().collect();
    let scored = shared_pairs
        .par_iter()
        .map(|((a, b), (_, kind))| score_representations(rep_of(a), rep_of(b), *kind))
        .collect::<Result<Vec<_>>>()?;

    let mut links = Vec::new();
    for (((a, b), (cve, kind)), score) in shared_pairs.iter().zip(scored) {
        if score.value >= thresholds.for_kind(*kind) {
            links.push(PocLink::new(
                a,
                b,
                LinkBasis::SharedCve { cve_id: cve.clone() },
                score.value,
                *kind,
            )?);
        }
    }

    let mut degradations = Vec::new();
    if let Some(setup) = classifier {
        let candidates = classifier_candidates(corpus);
        let outcomes = candidates
            .par_iter()
            .map(|(a, b, _)| {
                let (ra, rb) = (corpus.get(a).unwrap(), corpus.get(b).unwrap());
                classify_pair(setup.classifier, setup.fallback, ra, rb)
            })
            .collect::<Result<Vec<_>>>()?;
        for ((a, b, kind), outcome) in candidates.iter().zip(outcomes) {
            if let Some(d) = outcome.degradation {
                degradations.push(format!("{a}/{b}: {d}"));
            }
            if outcome.verdict.same {
                links.push(PocLink::new(a, b, LinkBasis::Classifier, outcome.verdict.confidence, *kind)?);
            }
        }
    }
    links.sort_by(|x, y| x.key().cmp(&y.key()));
    links.dedup_by(|later, earlier| later.key() == earlier.key());
    Ok(LinkGraph { links, degradations })
}

/// Pairs eligible for classifier linking: same kind and language, a shared
/// software name, no shared CVE id, and not both CVE-tagged.
fn classifier_candidates(corpus: &Corpus) -> Vec<(String, String, PairKind)> {
    let mut by_name: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, r) in corpus.reports().iter().enumerate() {
        let names: BTreeSet<String> = r.software.iter().map(|s| normalized(s)).collect();
        for n in names {
            by_name.entry(n).or_default().push(i);
        }
    }
    let reports = corpus.reports();
    let mut seen = BTreeSet::new();
    for members in by_name.values() {
        for (k, &i) in members.iter().enumerate() {
            for &j in &members[k + 1..] {
                let (x, y) = (&reports[i], &reports[j]);
                if x.shares_cve(y) || (!x.cve_ids.is_empty() && !y.cve_ids.is_empty()) {
                    continue;
                }
                if let Some(kind) = PairKind::of(x.content_kind, y.content_kind) {
                    let (a, b) = if x.id < y.id { (x, y) } else { (y, x) };
                    seen.insert((a.id.clone(), b.id.clone(), kind));
                }
            }
        }
    }
    seen.into_iter().collect()
}

#[derive(Serialize, Deserialize)]
struct LinkLine {
    a: String,
    b: String,
    basis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cve_id: Option<String>,
    similarity: f64,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lang: Option<LanguageId>,
}

/// One JSON object per line: `a, b, basis, cve_id?, similarity, kind, lang?`.
pub fn links_to_jsonl(links: &[PocLink]) -> String {
    let mut out = String::new();
    for l in links {
        let (basis, cve_id) = match &l.basis {
            LinkBasis::SharedCve { cve_id } => ("shared_cve", Some(cve_id.clone())),
            LinkBasis::Classifier => ("classifier", None),
        };
        let (kind, lang) = match l.kind {
            PairKind::CodePair(lang) => ("code_pair", Some(lang)),
            PairKind::TextPair => ("text_pair", None),
        };
        let line = LinkLine {
            a: l.a.clone(),
            b: l.b.clone(),
            basis: basis.into(),
            cve_id,
            similarity: l.similarity,
            kind: kind.into(),
            lang,
        };
        out.push_str(&serde_json::to_string(&line).expect("link lines serialize"));
        out.push('\n');
    }
    out
}

pub fn links_from_jsonl(path: &Path, text: &str) -> Result<Vec<PocLink>> {
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut links = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: LinkLine = serde_json::from_str(raw).map_err(|e| bad(i + 1, e.to_string()))?;
        let basis = match (line.basis.as_str(), line.cve_id) {
            ("shared_cve", Some(cve_id)) => LinkBasis::SharedCve { cve_id },
            ("classifier", None) => LinkBasis::Classifier,
            (b, _) => return Err(bad(i + 1, format!("bad basis {b:?}"))),
        };
        let kind = match (line.kind.as_str(), line.lang) {
            ("code_pair", Some(lang)) => PairKind::CodePair(lang),
            ("text_pair", None) => PairKind::TextPair,
            (k, _) => return Err(bad(i + 1, format!("bad kind {k:?}"))),
        };
        let link = PocLink::new(&line.a, &line.b, basis, line.similarity, kind).map_err(|e| bad(i + 1, e.to_string()))?;
        links.push(link);
    }
    Ok(links)
}
