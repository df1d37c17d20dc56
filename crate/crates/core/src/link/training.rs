//! Labelled report pairs for training an external pair classifier.
//!
//! Positives share at least one CVE id, negatives are CVE-tagged pairs that
//! share none. Each label is split separately: train and dev get the floor of
//! their share, test gets the remainder.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::match_software;
use crate::corpus::{Corpus, PocReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLabel {
    SameVulnerability,
    Different,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub title_a: String,
    pub title_b: String,
    pub content_a: String,
    pub content_b: String,
    pub software_match: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub a: String,
    pub b: String,
    pub label: PairLabel,
    pub features: PairFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            dev: 0.1,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.dev, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("split ratios must lie in [0, 1] and sum to 1 (got {self:?})")));
        }
        Ok(())
    }

    /// (train, dev, test) sizes for `n` items.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let dev = floor(self.dev).min(n - train);
        (train, dev, n - train - dev)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairTrainingSet {
    pub train: Vec<PairSample>,
    pub dev: Vec<PairSample>,
    pub test: Vec<PairSample>,
}

impl PairTrainingSet {
    pub fn partitions(&self) -> [(Partition, &[PairSample]); 3] {
        [
            (Partition::Train, &self.train),
            (Partition::Dev, &self.dev),
            (Partition::Test, &self.test),
        ]
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

// Above this many candidate negatives per requested one, sample by rejection
// instead of enumerating every pair.
const ENUMERATE_FACTOR: usize = 8;

fn sample(a: &PocReport, b: &PocReport, label: PairLabel) -> PairSample {
    PairSample {
        a: a.id.clone(),
        b: b.id.clone(),
        label,
        features: PairFeatures {
            title_a: a.title().unwrap_or("").to_string(),
            title_b: b.title().unwrap_or("").to_string(),
            content_a: a.raw_content.clone(),
            content_b: b.raw_content.clone(),
            software_match: match_software(a, b),
        },
    }
}

pub fn build_pair_training_set(
    corpus: &Corpus,
    n_pos: usize,
    n_neg: usize,
    split: SplitRatios,
    seed: u64,
) -> Result<PairTrainingSet> {
    split.validate()?;
    let tagged: Vec<&PocReport> = corpus.reports().iter().filter(|r| !r.cve_ids.is_empty()).collect();
    let m = tagged.len();

    let mut positives = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if tagged[i].shares_cve(tagged[j]) {
                positives.push((i, j));
            }
        }
    }
    let total = m * m.saturating_sub(1) / 2;
    let available_neg = total - positives.len();
    if positives.len() < n_pos {
        return Err(Error::InsufficientPairs {
            label: "positive",
            needed: n_pos,
            available: positives.len(),
        });
    }
    if available_neg < n_neg {
        return Err(Error::InsufficientPairs {
            label: "negative",
            needed: n_neg,
            available: available_neg,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives.shuffle(&mut rng);
    positives.truncate(n_pos);

    let negatives: Vec<(usize, usize)> = if available_neg <= n_neg.saturating_mul(ENUMERATE_FACTOR) {
        let mut all: Vec<_> = (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .filter(|&(i, j)| !tagged[i].shares_cve(tagged[j]))
            .collect();
        all.shuffle(&mut rng);
        all.truncate(n_neg);
        all
    } else {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(n_neg);
        while out.len() < n_neg {
            let i = rng.gen_range(0..m);
            let j = rng.gen_range(0..m);
            let key = (i.min(j), i.max(j));
            if i == j || tagged[i].shares_cve(tagged[j]) || !seen.insert(key) {
                continue;
            }
            out.push(key);
        }
        out
    };

    let mut set = PairTrainingSet::default();
    for (pairs, label) in [(positives, PairLabel::SameVulnerability), (negatives, PairLabel::Different)] {
        let (train, dev, _) = split.sizes(pairs.len());
        for (k, (i, j)) in pairs.into_iter().enumerate() {
            let (x, y) = if tagged[i].id < tagged[j].id { (i, j) } else { (j, i) };
            let s = sample(tagged[x], tagged[y], label);
            if k < train {
                set.train.push(s);
            } else if k < train + dev {
                set.dev.push(s);
            } else {
                set.test.push(s);
            }
        }
    }
    // Interleave labels within each partition.
    set.train.shuffle(&mut rng);
    set.dev.shuffle(&mut rng);
    set.test.shuffle(&mut rng);
    Ok(set)
}

#[derive(Serialize)]
struct SampleLine<'a> {
    a: &'a str,
    b: &'a str,
    title_a: &'a str,
    title_b: &'a str,
    content_a: &'a str,
    content_b: &'a str,
    label: PairLabel,
    partition: Partition,
}

/// One JSON object per line: `a, b, title_a, title_b, content_a, content_b,
/// label, partition`; train, then dev, then test.
pub fn pair_training_set_to_jsonl(set: &PairTrainingSet) -> String {
    let mut out = String::new();
    for (partition, samples) in set.partitions() {
        for s in samples {
            let line = SampleLine {
                a: &s.a,
                b: &s.b,
                title_a: &s.features.title_a,
                title_b: &s.features.title_b,
                content_a: &s.features.content_a,
                content_b: &s.features.content_b,
                label: s.label,
                partition,
            };
            out.push_str(&serde_json::to_string(&line).expect("sample lines serialize"));
            out.push('\n');
        }
    }
    out
}
