use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DatasetError, LabelVocabulary, LabeledSample};

/// Label frequency cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Threshold {
    /// Most frequent ids covering this fraction of all label occurrences,
    /// plus every id tied with the last one admitted.
    CoverageFraction(f64),
    MinCount(usize),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::CoverageFraction(0.75)
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::CoverageFraction(x) => write!(f, "coverage:{x}"),
            Threshold::MinCount(n) => write!(f, "mincount:{n}"),
        }
    }
}

impl FromStr for Threshold {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DatasetError::BadThreshold(s.to_string());
        let (mode, value) = s.split_once(':').ok_or_else(bad)?;
        let t = match mode.trim().to_ascii_lowercase().as_str() {
            "coverage" => Threshold::CoverageFraction(value.trim().parse().map_err(|_| bad())?),
            "mincount" | "min_count" => Threshold::MinCount(value.trim().parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        t.validate()?;
        Ok(t)
    }
}

impl Threshold {
    pub fn validate(&self) -> Result<(), DatasetError> {
        match *self {
            Threshold::CoverageFraction(x) if !(x > 0.0 && x <= 1.0) => Err(DatasetError::BadFraction(x)),
            _ => Ok(()),
        }
    }
}

/// Number of samples carrying each label.
pub fn label_frequencies<'a>(samples: impl IntoIterator<Item = &'a LabeledSample>) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for s in samples {
        for l in &s.labels {
            *counts.entry(l.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// Ids that survive `threshold` given per-id counts. Ids with a zero count
/// are never kept in coverage mode.
pub fn select_labels(counts: &BTreeMap<String, usize>, threshold: Threshold) -> Result<BTreeSet<String>, DatasetError> {
    threshold.validate()?;
    match threshold {
        Threshold::MinCount(min) => Ok(counts
            .iter()
            .filter(|&(_, &c)| c >= min)
            .map(|(id, _)| id.clone())
            .collect()),
        Threshold::CoverageFraction(fraction) => {
            let total: usize = counts.values().sum();
            if total == 0 {
                return Ok(BTreeSet::new());
            }
            let mut ranked: Vec<usize> = counts.values().copied().collect();
            ranked.sort_unstable_by(|a, b| b.cmp(a));
            let target = fraction * total as f64;
            let mut cum = 0usize;
            let mut boundary = ranked[0];
            for c in ranked {
                cum += c;
                boundary = c;
                if cum as f64 >= target {
                    break;
                }
            }
            let boundary = boundary.max(1);
            Ok(counts
                .iter()
                .filter(|&(_, &c)| c >= boundary)
                .map(|(id, _)| id.clone())
                .collect())
        }
    }
}

/// Outcome of [`frequency_filter`].
#[derive(Debug, Clone)]
pub struct Filtered {
    pub samples: Vec<LabeledSample>,
    pub vocabulary: LabelVocabulary,
    /// With-issue samples whose every label was filtered out.
    pub emptied: usize,
}

/// Drops infrequent labels. Samples that lose all their labels leave the
/// with-issue pool; samples that had none to begin with are kept as they are.
pub fn frequency_filter(
    samples: Vec<LabeledSample>,
    threshold: Threshold,
    vocab: &LabelVocabulary,
) -> Result<Filtered, DatasetError> {
    let counts = label_frequencies(&samples);
    let kept = select_labels(&counts, threshold)?;
    let mut emptied = 0;
    let samples = samples
        .into_iter()
        .filter_map(|mut s| {
            if s.labels.is_empty() {
                return Some(s);
            }
            s.labels.retain(|l| kept.contains(l));
            if s.labels.is_empty() {
                emptied += 1;
                None
            } else {
                Some(s)
            }
        })
        .collect();
    let mut vocabulary = vocab.clone();
    vocabulary.effective_ids = kept.clone();
    vocabulary.frequency = counts.into_iter().filter(|(id, _)| kept.contains(id)).collect();
    Ok(Filtered {
        samples,
        vocabulary,
        emptied,
    })
}
