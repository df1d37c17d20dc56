//! Precision/recall of extracted aspects against hand annotations.
//!
//! Gold file: one JSON object per line, `{"id": "...", "aspects": {"title": ["..."], ...}}`.
//! Slots absent from `aspects` have no gold values.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalized, Aspect, Corpus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub id: String,
    #[serde(default)]
    pub aspects: BTreeMap<Aspect, Vec<String>>,
}

pub type GoldSet = BTreeMap<String, BTreeMap<Aspect, Vec<String>>>;

pub fn load_gold(path: &Path) -> Result<GoldSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut gold = GoldSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: GoldRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?;
        gold.insert(rec.id, rec.aspects);
    }
    Ok(gold)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SlotCounts {
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl SlotCounts {
    /// Zero predictions give precision 0 (check `predicted` to tell apart).
    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.gold)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionScore {
    pub per_slot: BTreeMap<Aspect, SlotCounts>,
    pub overall: SlotCounts,
    /// No values were predicted at all; precision is reported as 0.
    pub zero_predictions: bool,
}

impl ExtractionScore {
    pub fn precision(&self) -> f64 {
        self.overall.precision()
    }

    pub fn recall(&self) -> f64 {
        self.overall.recall()
    }

    pub fn slot(&self, aspect: Aspect) -> SlotCounts {
        self.per_slot.get(&aspect).copied().unwrap_or_default()
    }
}

/// Micro-averaged scores. A predicted value counts as a true positive when it
/// equals (case-insensitive, trimmed) a gold value not yet matched.
pub fn evaluate_extraction(gold: &GoldSet, predicted: &Corpus) -> Result<ExtractionScore> {
    let gold_ids: BTreeSet<&str> = gold.keys().map(String::as_str).collect();
    let pred_ids: BTreeSet<&str> = predicted.reports().iter().map(|r| r.id.as_str()).collect();
    if gold_ids != pred_ids {
        return Err(Error::IdMismatch {
            missing_in_predicted: gold_ids.difference(&pred_ids).map(|s| s.to_string()).collect(),
            missing_in_gold: pred_ids.difference(&gold_ids).map(|s| s.to_string()).collect(),
        });
    }

    let mut per_slot: BTreeMap<Aspect, SlotCounts> =
        Aspect::ALL.into_iter().map(|a| (a, SlotCounts::default())).collect();
    for report in predicted.reports() {
        let gold_slots = &gold[&report.id];
        for aspect in Aspect::ALL {
            let mut unmatched: Vec<String> = gold_slots
                .get(&aspect)
                .map(|v| v.iter().map(|s| normalized(s)).collect())
                .unwrap_or_default();
            let counts = per_slot.get_mut(&aspect).unwrap();
            counts.gold += unmatched.len();
            for value in report.aspects.originals(aspect) {
                counts.predicted += 1;
                let key = normalized(value.text());
                if let Some(pos) = unmatched.iter().position(|g| *g == key) {
                    unmatched.swap_remove(pos);
                    counts.true_positives += 1;
                }
            }
        }
    }

    let overall = per_slot.values().fold(SlotCounts::default(), |acc, c| SlotCounts {
        true_positives: acc.true_positives + c.true_positives,
        predicted: acc.predicted + c.predicted,
        gold: acc.gold + c.gold,
    });
    Ok(ExtractionScore {
        per_slot,
        zero_predictions: overall.predicted == 0,
        overall,
    })
}

/// Gold annotations read off a corpus's original values.
pub fn gold_from_corpus(corpus: &Corpus) -> GoldSet {
    corpus
        .reports()
        .iter()
        .map(|r| {
            let slots = Aspect::ALL
                .into_iter()
                .filter_map(|a| {
                    let v: Vec<String> = r.aspects.originals(a).map(|v| v.text().to_string()).collect();
                    (!v.is_empty()).then_some((a, v))
                })
                .collect();
            (r.id.clone(), slots)
        })
        .collect()
}
