use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::LanguageId;
use crate::error::{Error, Result};
use crate::link::LinkBasis;

/// Platform a report was collected from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SourceId {
    ExploitDb,
    PacketStorm,
    Seebug,
    CxSecurity,
    Other(String),
}

impl SourceId {
    pub fn label(&self) -> &str {
        match self {
            SourceId::ExploitDb => "ExploitDB",
            SourceId::PacketStorm => "PacketStorm",
            SourceId::Seebug => "Seebug",
            SourceId::CxSecurity => "CXSecurity",
            SourceId::Other(label) => label,
        }
    }
}

impl fmt::Display for SourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SourceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        let key: String = trimmed
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Ok(match key.as_str() {
            "exploitdb" | "edb" => SourceId::ExploitDb,
            "packetstorm" | "packetstormsecurity" => SourceId::PacketStorm,
            "seebug" => SourceId::Seebug,
            "cxsecurity" | "cxsec" => SourceId::CxSecurity,
            _ if trimmed.is_empty() => {
                return Err(Error::Invalid("source label must not be empty".into()))
            }
            _ => SourceId::Other(trimmed.to_string()),
        })
    }
}

impl From<SourceId> for String {
    fn from(s: SourceId) -> String {
        s.label().to_string()
    }
}

impl TryFrom<String> for SourceId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "lang", rename_all = "snake_case")]
pub enum ContentKind {
    Code(LanguageId),
    Text,
    Other,
    Unclassified,
}

/// The eight key aspects a PoC report should carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aspect {
    TriggerStep,
    VerificationOracle,
    TestPlatform,
    SoftwareVersion,
    Title,
    Author,
    PublishTime,
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Exploit,
    Basic,
}

impl Aspect {
    pub const ALL: [Aspect; 8] = [
        Aspect::TriggerStep,
        Aspect::VerificationOracle,
        Aspect::TestPlatform,
        Aspect::SoftwareVersion,
        Aspect::Title,
        Aspect::Author,
        Aspect::PublishTime,
        Aspect::Reference,
    ];

    /// Slots filled by the structured (NER-style) extractor.
    pub const STRUCTURED: [Aspect; 5] = [
        Aspect::TestPlatform,
        Aspect::SoftwareVersion,
        Aspect::Title,
        Aspect::Author,
        Aspect::PublishTime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aspect::TriggerStep => "trigger_step",
            Aspect::VerificationOracle => "verification_oracle",
            Aspect::TestPlatform => "test_platform",
            Aspect::SoftwareVersion => "software_version",
            Aspect::Title => "title",
            Aspect::Author => "author",
            Aspect::PublishTime => "publish_time",
            Aspect::Reference => "reference",
        }
    }

    pub fn category(self) -> Category {
        match self {
            Aspect::TriggerStep
            | Aspect::VerificationOracle
            | Aspect::TestPlatform
            | Aspect::SoftwareVersion => Category::Exploit,
            Aspect::Title | Aspect::Author | Aspect::PublishTime | Aspect::Reference => {
                Category::Basic
            }
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aspect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Aspect::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| Error::Invalid(format!("unknown aspect {s:?}")))
    }
}

/// Where an aspect value came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "origin", rename_all = "snake_case")]
pub enum Provenance {
    Original,
    FromCve {
        cve_id: String,
    },
    FromPoc {
        donor: String,
        similarity: f64,
        basis: LinkBasis,
    },
}

impl Provenance {
    pub fn is_original(&self) -> bool {
        matches!(self, Provenance::Original)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectValue {
    text: String,
    provenance: Provenance,
}

impl AspectValue {
    /// Trims `text`; rejects blank text and out-of-range donor similarity.
    pub fn new(text: &str, provenance: Provenance) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::Invalid("aspect value text is blank".into()));
        }
        if let Provenance::FromPoc { similarity, .. } = &provenance {
            if !(0.0..=1.0).contains(similarity) {
                return Err(Error::Invalid(format!(
                    "donor similarity {similarity} outside [0, 1]"
                )));
            }
        }
        Ok(AspectValue {
            text: text.to_string(),
            provenance,
        })
    }

    pub fn original(text: &str) -> Result<Self> {
        Self::new(text, Provenance::Original)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}

/// Case-insensitive, whitespace-trimmed comparison key used for dedup.
pub fn normalized(text: &str) -> String {
    text.trim().to_lowercase()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AspectSet {
    #[serde(default)]
    trigger_step: Vec<AspectValue>,
    #[serde(default)]
    verification_oracle: Vec<AspectValue>,
    #[serde(default)]
    test_platform: Vec<AspectValue>,
    #[serde(default)]
    software_version: Vec<AspectValue>,
    #[serde(default)]
    title: Vec<AspectValue>,
    #[serde(default)]
    author: Vec<AspectValue>,
    #[serde(default)]
    publish_time: Vec<AspectValue>,
    #[serde(default)]
    reference: Vec<AspectValue>,
}

impl AspectSet {
    pub fn get(&self, aspect: Aspect) -> &[AspectValue] {
        match aspect {
            Aspect::TriggerStep => &self.trigger_step,
            Aspect::VerificationOracle => &self.verification_oracle,
            Aspect::TestPlatform => &self.test_platform,
            Aspect::SoftwareVersion => &self.software_version,
            Aspect::Title => &self.title,
            Aspect::Author => &self.author,
            Aspect::PublishTime => &self.publish_time,
            Aspect::Reference => &self.reference,
        }
    }

    fn slot_mut(&mut self, aspect: Aspect) -> &mut Vec<AspectValue> {
        match aspect {
            Aspect::TriggerStep => &mut self.trigger_step,
            Aspect::VerificationOracle => &mut self.verification_oracle,
            Aspect::TestPlatform => &mut self.test_platform,
            Aspect::SoftwareVersion => &mut self.software_version,
            Aspect::Title => &mut self.title,
            Aspect::Author => &mut self.author,
            Aspect::PublishTime => &mut self.publish_time,
            Aspect::Reference => &mut self.reference,
        }
    }

    pub fn contains_text(&self, aspect: Aspect, text: &str) -> bool {
        let key = normalized(text);
        self.get(aspect).iter().any(|v| normalized(&v.text) == key)
    }

    /// Appends `value` unless the slot already holds the same text.
    /// Returns whether the value was added.
    pub fn push(&mut self, aspect: Aspect, value: AspectValue) -> bool {
        if self.contains_text(aspect, &value.text) {
            return false;
        }
        self.slot_mut(aspect).push(value);
        true
    }

    pub fn is_missing(&self, aspect: Aspect) -> bool {
        self.get(aspect).is_empty()
    }

    /// Whether the slot holds at least one value taken from the report itself.
    pub fn has_original(&self, aspect: Aspect) -> bool {
        self.get(aspect).iter().any(|v| v.provenance.is_original())
    }

    pub fn originals(&self, aspect: Aspect) -> impl Iterator<Item = &AspectValue> {
        self.get(aspect).iter().filter(|v| v.provenance.is_original())
    }

    pub fn iter(&self) -> impl Iterator<Item = (Aspect, &AspectValue)> {
        Aspect::ALL
            .into_iter()
            .flat_map(move |a| self.get(a).iter().map(move |v| (a, v)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocReport {
    pub id: String,
    pub source: SourceId,
    pub raw_content: String,
    pub content_kind: ContentKind,
    #[serde(default)]
    pub cve_ids: Vec<String>,
    #[serde(default)]
    pub aspects: AspectSet,
    /// Software names recovered during extraction; used to verify CVE
    /// associations and to gate classifier-based linking.
    #[serde(default)]
    pub software: Vec<String>,
}

impl PocReport {
    pub fn new(id: impl Into<String>, source: SourceId, raw_content: impl Into<String>) -> Self {
        PocReport {
            id: id.into(),
            source,
            raw_content: raw_content.into(),
            content_kind: ContentKind::Unclassified,
            cve_ids: Vec::new(),
            aspects: AspectSet::default(),
            software: Vec::new(),
        }
    }

    pub fn add_cve_id(&mut self, cve_id: &str) -> Result<bool> {
        let canonical = crate::extract::normalize_cve_id(cve_id)
            .ok_or_else(|| Error::Invalid(format!("not a CVE identifier: {cve_id:?}")))?;
        if self.cve_ids.contains(&canonical) {
            return Ok(false);
        }
        self.cve_ids.push(canonical);
        Ok(true)
    }

    pub fn shares_cve(&self, other: &PocReport) -> bool {
        self.cve_ids.iter().any(|c| other.cve_ids.contains(c))
    }

    /// First original title, if any.
    pub fn title(&self) -> Option<&str> {
        self.aspects.originals(Aspect::Title).next().map(|v| v.text())
    }

    fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::Invalid("report id is empty".into()));
        }
        for cve in &self.cve_ids {
            if crate::extract::normalize_cve_id(cve).as_deref() != Some(cve.as_str()) {
                return Err(Error::Invalid(format!(
                    "report {}: {cve:?} is not a canonical CVE id",
                    self.id
                )));
            }
        }
        for (aspect, value) in self.aspects.iter() {
            if value.text().trim().is_empty() {
                return Err(Error::Invalid(format!(
                    "report {}: blank value in {aspect}",
                    self.id
                )));
            }
        }
        for aspect in Aspect::ALL {
            let slot = self.aspects.get(aspect);
            for (i, v) in slot.iter().enumerate() {
                if slot[..i]
                    .iter()
                    .any(|u| normalized(u.text()) == normalized(v.text()))
                {
                    return Err(Error::Invalid(format!(
                        "report {}: duplicate value {:?} in {aspect}",
                        self.id,
                        v.text()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// An ordered collection of reports with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    reports: Vec<PocReport>,
    index: HashMap<String, usize>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.reports == other.reports
    }
}

impl Corpus {
    pub fn new(reports: Vec<PocReport>) -> Result<Self> {
        let mut index = HashMap::with_capacity(reports.len());
        for (i, r) in reports.iter().enumerate() {
            r.validate()?;
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate report id {:?}", r.id)));
            }
        }
        Ok(Corpus { reports, index })
    }

    pub fn reports(&self) -> &[PocReport] {
        &self.reports
    }

    pub fn into_reports(self) -> Vec<PocReport> {
        self.reports
    }

    pub fn get(&self, id: &str) -> Option<&PocReport> {
        self.index.get(id).map(|&i| &self.reports[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub(crate) fn report_mut(&mut self, id: &str) -> Option<&mut PocReport> {
        let i = *self.index.get(id)?;
        Some(&mut self.reports[i])
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    /// Applies `f` to every report, producing a new corpus. Ids must survive.
    pub fn try_map<F>(&self, f: F) -> Result<Corpus>
    where
        F: Fn(&PocReport) -> Result<PocReport>,
    {
        let reports = self.reports.iter().map(f).collect::<Result<Vec<_>>>()?;
        Corpus::new(reports)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Product {
    pub name: String,
    #[serde(default)]
    pub versions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CveEntry {
    pub cve_id: String,
    pub products: Vec<Product>,
    #[serde(default)]
    pub platforms: Vec<String>,
}

impl CveEntry {
    /// Folds `other` into `self` by set union, keeping first-seen order.
    pub fn merge(&mut self, other: CveEntry) {
        for product in other.products {
            let key = normalized(&product.name);
            match self
                .products
                .iter_mut()
                .find(|p| normalized(&p.name) == key)
            {
                Some(existing) => {
                    for v in product.versions {
                        push_unique(&mut existing.versions, v);
                    }
                }
                None => self.products.push(product),
            }
        }
        for platform in other.platforms {
            push_unique(&mut self.platforms, platform);
        }
    }

    pub fn all_versions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for v in self.products.iter().flat_map(|p| &p.versions) {
            if !out.iter().any(|o| normalized(o) == normalized(v)) {
                out.push(v);
            }
        }
        out
    }
}

pub(crate) fn push_unique(list: &mut Vec<String>, value: String) {
    let key = normalized(&value);
    if !key.is_empty() && !list.iter().any(|v| normalized(v) == key) {
        list.push(value.trim().to_string());
    }
}

pub type CveDb = std::collections::BTreeMap<String, CveEntry>;
