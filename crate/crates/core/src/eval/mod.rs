//! Accuracy, precision, recall and F1 for binary and multi-label
//! predictions, weighted per-type averages, head/tail analysis and timing.

mod headtail;
mod timing;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{LabeledSample, NO_ISSUE};
use crate::model::PredictionRecord;

pub use headtail::{head_tail_metrics, head_tail_partition, HeadTailConfig, HeadTailPartition, HeadTailReport};
pub use timing::{speedup_percent, timing_bench, FiveNumber, ProjectTiming, Stage, StageRunner, TimingReport, LinterComparison};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {truth} ground-truth samples")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("no ground truth for predicted sample {0}")]
    UnknownSample(String),
    #[error("sample {0} appears twice")]
    DuplicateSample(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Expected issue labels of one sample; empty means no issues.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    pub sample_id: String,
    pub labels: BTreeSet<String>,
}

impl From<&LabeledSample> for Truth {
    fn from(s: &LabeledSample) -> Self {
        Truth {
            sample_id: s.id.clone(),
            labels: s.labels.clone(),
        }
    }
}

impl Truth {
    /// Label set with an empty set written as `{NOISSUE}`.
    pub fn label_set(&self) -> BTreeSet<String> {
        if self.labels.is_empty() {
            BTreeSet::from([NO_ISSUE.to_string()])
        } else {
            self.labels.clone()
        }
    }
}

/// Pairs predictions with truth by sample id.
fn align<'a>(preds: &'a [PredictionRecord], truth: &'a [Truth]) -> Result<Vec<(&'a PredictionRecord, &'a Truth)>, EvalError> {
    if preds.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predictions: preds.len(),
            truth: truth.len(),
        });
    }
    let mut by_id: HashMap<&str, &Truth> = HashMap::with_capacity(truth.len());
    for t in truth {
        if by_id.insert(&t.sample_id, t).is_some() {
            return Err(EvalError::DuplicateSample(t.sample_id.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    preds
        .iter()
        .map(|p| {
            if !seen.insert(p.sample_id.as_str()) {
                return Err(EvalError::DuplicateSample(p.sample_id.clone()));
            }
            by_id
                .get(p.sample_id.as_str())
                .map(|&t| (p, t))
                .ok_or_else(|| EvalError::UnknownSample(p.sample_id.clone()))
        })
        .collect()
}

/// Binary counts. Per-type counts leave `tn` at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub total: usize,
}

/// A ratio whose denominator was zero is reported as 0 and named here.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize, name: &'static str, flags: &mut Vec<&'static str>) -> f64 {
    if den == 0 {
        flags.push(name);
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn prf(tp: usize, fp: usize, fn_: usize, flags: &mut Vec<&'static str>) -> Scores {
    let precision = ratio(tp, tp + fp, "precision", flags);
    let recall = ratio(tp, tp + fn_, "recall", flags);
    let f1 = if precision + recall == 0.0 {
        flags.push("f1");
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores { precision, recall, f1 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryReport {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    #[serde(flatten)]
    pub scores: Scores,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_denominators: Vec<String>,
}

impl BinaryReport {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let mut flags = Vec::new();
        let accuracy = ratio(counts.tp + counts.tn, counts.total, "accuracy", &mut flags);
        let scores = prf(counts.tp, counts.fp, counts.fn_, &mut flags);
        BinaryReport {
            counts,
            accuracy,
            scores,
            zero_denominators: flags.into_iter().map(String::from).collect(),
        }
    }
}

/// Issue detection: a prediction is positive when it reports any issue, a
/// truth is positive when it has any label.
pub fn binary_metrics(preds: &[PredictionRecord], truth: &[Truth]) -> Result<BinaryReport, EvalError> {
    let mut c = ConfusionCounts::default();
    for (p, t) in align(preds, truth)? {
        match (p.is_positive(), !t.labels.is_empty()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
        c.total += 1;
    }
    Ok(BinaryReport::from_counts(c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTypeMetrics {
    pub type_id: String,
    /// Test samples carrying the label.
    pub n: usize,
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub scores: Scores,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_denominators: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelReport {
    pub samples: usize,
    /// Fraction of samples whose predicted label set equals the expected one.
    pub exact_match_accuracy: f64,
    /// Σ n(i)·m(i) / Σ n(i) over types with n(i) ≥ 1.
    pub weighted: Scores,
    pub include_noissue: bool,
    pub per_type: Vec<PerTypeMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiLabelOptions {
    /// Count the no-issue label as a type in the weighted averages.
    pub include_noissue: bool,
}

impl Default for MultiLabelOptions {
    fn default() -> Self {
        MultiLabelOptions { include_noissue: true }
    }
}

/// Multi-label metrics over `(predicted, expected)` label-set pairs, with
/// per-type rows for every label in `universe` or seen in either set.
pub(crate) fn multilabel_from_sets(
    pairs: &[(BTreeSet<String>, BTreeSet<String>)],
    universe: &BTreeSet<String>,
    opts: MultiLabelOptions,
) -> MultiLabelReport {
    let mut types: BTreeMap<String, ConfusionCounts> = universe.iter().map(|l| (l.clone(), Default::default())).collect();
    let mut n: BTreeMap<String, usize> = BTreeMap::new();
    let mut exact = 0;
    for (pred, truth) in pairs {
        if pred == truth {
            exact += 1;
        }
        for l in truth {
            *n.entry(l.clone()).or_insert(0) += 1;
            let c = types.entry(l.clone()).or_default();
            if pred.contains(l) {
                c.tp += 1;
            } else {
                c.fn_ += 1;
            }
        }
        for l in pred.difference(truth) {
            types.entry(l.clone()).or_default().fp += 1;
        }
    }
    let per_type: Vec<PerTypeMetrics> = types
        .into_iter()
        .map(|(type_id, mut counts)| {
            counts.total = counts.tp + counts.fp + counts.fn_;
            let mut flags = Vec::new();
            let scores = prf(counts.tp, counts.fp, counts.fn_, &mut flags);
            PerTypeMetrics {
                n: n.get(&type_id).copied().unwrap_or(0),
                type_id,
                counts,
                scores,
                zero_denominators: flags.into_iter().map(String::from).collect(),
            }
        })
        .collect();
    let weighted_rows = per_type
        .iter()
        .filter(|t| t.n > 0 && (opts.include_noissue || t.type_id != NO_ISSUE));
    let weighted = weighted_average(weighted_rows.map(|t| (t.n, t.scores)));
    MultiLabelReport {
        samples: pairs.len(),
        exact_match_accuracy: if pairs.is_empty() { 0.0 } else { exact as f64 / pairs.len() as f64 },
        weighted,
        include_noissue: opts.include_noissue,
        per_type,
    }
}

/// Σ n·m / Σ n for each of precision, recall and F1.
pub fn weighted_average(rows: impl IntoIterator<Item = (usize, Scores)>) -> Scores {
    let mut total = 0usize;
    let mut acc = Scores::default();
    for (n, s) in rows {
        total += n;
        acc.precision += n as f64 * s.precision;
        acc.recall += n as f64 * s.recall;
        acc.f1 += n as f64 * s.f1;
    }
    if total == 0 {
        return Scores::default();
    }
    let t = total as f64;
    Scores {
        precision: acc.precision / t,
        recall: acc.recall / t,
        f1: acc.f1 / t,
    }
}

/// Issue identification metrics. A sample without labels counts as
/// `{NOISSUE}` on both sides.
pub fn multilabel_metrics(
    preds: &[PredictionRecord],
    truth: &[Truth],
    universe: &BTreeSet<String>,
    opts: MultiLabelOptions,
) -> Result<MultiLabelReport, EvalError> {
    let pairs: Vec<_> = align(preds, truth)?
        .into_iter()
        .map(|(p, t)| (predicted_set(p), t.label_set()))
        .collect();
    Ok(multilabel_from_sets(&pairs, universe, opts))
}

pub(crate) fn predicted_set(p: &PredictionRecord) -> BTreeSet<String> {
    let issues = p.issue_labels();
    if issues.is_empty() {
        BTreeSet::from([NO_ISSUE.to_string()])
    } else {
        issues
    }
}

/// Everything `eval` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binary: Option<BinaryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multi_label: Option<MultiLabelReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub head_tail: Option<HeadTailReport>,
}

/// Rows of `name, Accuracy, Precision, Recall, F1`.
pub fn write_summary_csv<'a>(
    w: impl Write,
    rows: impl IntoIterator<Item = (&'a str, f64, Scores)>,
) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["Name", "Accuracy", "Precision", "Recall", "F1"])?;
    for (name, acc, s) in rows {
        out.write_record([
            name.to_string(),
            format!("{acc:.3}"),
            format!("{:.3}", s.precision),
            format!("{:.3}", s.recall),
            format!("{:.3}", s.f1),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per issue type: `Type, n, Precision, Recall, F1`.
pub fn write_per_type_csv(w: impl Write, report: &MultiLabelReport) -> Result<(), EvalError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["Type", "n", "Precision", "Recall", "F1"])?;
    for t in &report.per_type {
        out.write_record([
            t.type_id.clone(),
            t.n.to_string(),
            format!("{:.3}", t.scores.precision),
            format!("{:.3}", t.scores.recall),
            format!("{:.3}", t.scores.f1),
        ])?;
    }
    out.flush()?;
    Ok(())
}
