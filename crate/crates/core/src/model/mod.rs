//! Issue classifiers: a hashed-feature logistic baseline, an external
//! backend reached through batch files, and the two-stage pipeline in which
//! a binary verdict gates multi-label identification.

mod baseline;
mod external;
pub mod protocol;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::NO_ISSUE;
use crate::extract::MethodUnit;
use crate::lex::LexError;
use crate::transform::{apply_format, FormattedSample, InputFormat, TransformOptions};

pub use baseline::{BaselineModel, EpochReport, FeatureHasher, Hyperparams, TrainingReport, DEFAULT_DIMS_LOG2};
pub use external::ExternalBackend;

pub const HAS_ISSUE: &str = "has-issue";
pub const NO_ISSUE_BINARY: &str = "no-issue";
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid classifier spec: {0}")]
    Spec(String),
    #[error("sample {sample} carries label {label} outside the classifier's labels")]
    UnknownLabel { sample: String, label: String },
    #[error("sample {0} was not answered by the backend")]
    MissingSample(String),
    #[error("backend answered for sample {0}, which was not requested")]
    UnexpectedSample(String),
    #[error("backend protocol violation: {0}")]
    Protocol(String),
    #[error("backend process failed: {0}")]
    Backend(String),
    #[error("{0}")]
    Io(String),
    #[error("model file: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("cannot format method {id}: {source}")]
    Format {
        id: String,
        #[source]
        source: LexError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Task {
    Binary,
    MultiLabel,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Binary => "BINARY",
            Task::MultiLabel => "MULTI_LABEL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Backend {
    #[default]
    Baseline,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub task: Task,
    pub label_ids: Vec<String>,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub hyperparams: BTreeMap<String, serde_json::Value>,
}

impl ClassifierSpec {
    pub fn binary() -> Self {
        ClassifierSpec {
            task: Task::Binary,
            label_ids: vec![HAS_ISSUE.to_string(), NO_ISSUE_BINARY.to_string()],
            backend: Backend::Baseline,
            hyperparams: BTreeMap::new(),
        }
    }

    /// Issue ids plus the reserved no-issue label, sorted.
    pub fn multi_label(issue_ids: impl IntoIterator<Item = String>) -> Result<Self, ModelError> {
        let mut ids: BTreeSet<String> = issue_ids.into_iter().collect();
        ids.insert(NO_ISSUE.to_string());
        let spec = ClassifierSpec {
            task: Task::MultiLabel,
            label_ids: ids.into_iter().collect(),
            backend: Backend::Baseline,
            hyperparams: BTreeMap::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let unique: BTreeSet<&String> = self.label_ids.iter().collect();
        if unique.len() != self.label_ids.len() {
            return Err(ModelError::Spec("duplicate label ids".into()));
        }
        match self.task {
            Task::Binary if self.label_ids != [HAS_ISSUE, NO_ISSUE_BINARY] => Err(ModelError::Spec(format!(
                "binary labels must be [{HAS_ISSUE}, {NO_ISSUE_BINARY}]"
            ))),
            Task::MultiLabel if !unique.contains(&NO_ISSUE.to_string()) => {
                Err(ModelError::Spec(format!("multi-label spec must include {NO_ISSUE}")))
            }
            Task::MultiLabel if self.label_ids.len() < 2 => Err(ModelError::Spec("no issue labels".into())),
            _ => Ok(()),
        }
    }

    /// Target labels for a sample with the given issue labels.
    pub fn targets(&self, sample_id: &str, issues: &BTreeSet<String>) -> Result<BTreeSet<String>, ModelError> {
        match self.task {
            Task::Binary => Ok(BTreeSet::from([if issues.is_empty() { NO_ISSUE_BINARY } else { HAS_ISSUE }.to_string()])),
            Task::MultiLabel => {
                if issues.is_empty() {
                    return Ok(BTreeSet::from([NO_ISSUE.to_string()]));
                }
                if let Some(l) = issues.iter().find(|l| l.as_str() == NO_ISSUE || !self.label_ids.contains(l)) {
                    return Err(ModelError::UnknownLabel {
                        sample: sample_id.to_string(),
                        label: l.clone(),
                    });
                }
                Ok(issues.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub scores: BTreeMap<String, f64>,
    #[serde(default)]
    pub decided_labels: BTreeSet<String>,
}

impl PredictionRecord {
    pub fn new(task: Task, sample_id: String, scores: BTreeMap<String, f64>, threshold: f64) -> Self {
        let decided_labels = decide(task, &scores, threshold);
        PredictionRecord {
            sample_id,
            scores,
            decided_labels,
        }
    }

    /// Whether the decision reports at least one issue.
    pub fn is_positive(&self) -> bool {
        self.decided_labels.contains(HAS_ISSUE)
            || self
                .decided_labels
                .iter()
                .any(|l| l != NO_ISSUE && l != NO_ISSUE_BINARY)
    }

    /// Issue labels of the decision; empty for a no-issue verdict.
    pub fn issue_labels(&self) -> BTreeSet<String> {
        self.decided_labels
            .iter()
            .filter(|l| l.as_str() != NO_ISSUE && l.as_str() != NO_ISSUE_BINARY)
            .cloned()
            .collect()
    }
}

/// Thresholds scores into a label set that is never empty.
///
/// Binary: `has-issue` iff its score clears the threshold. Multi-label: every
/// label clearing the threshold; nothing clearing it yields `{NOISSUE}`, and
/// `NOISSUE` is dropped when an issue label also clears it.
pub fn decide(task: Task, scores: &BTreeMap<String, f64>, threshold: f64) -> BTreeSet<String> {
    match task {
        Task::Binary => {
            let positive = scores.get(HAS_ISSUE).is_some_and(|&s| s >= threshold);
            BTreeSet::from([if positive { HAS_ISSUE } else { NO_ISSUE_BINARY }.to_string()])
        }
        Task::MultiLabel => {
            let mut set: BTreeSet<String> = scores
                .iter()
                .filter(|&(_, &s)| s >= threshold)
                .map(|(l, _)| l.clone())
                .collect();
            if set.len() > 1 {
                set.remove(NO_ISSUE);
            }
            if set.is_empty() {
                set.insert(NO_ISSUE.to_string());
            }
            set
        }
    }
}

/// Anything that scores formatted samples.
pub trait Classifier {
    fn spec(&self) -> &ClassifierSpec;

    /// One record per sample, in sample order.
    fn predict(&self, samples: &[FormattedSample]) -> Result<Vec<PredictionRecord>, ModelError>;
}

/// Binary and multi-label outputs of the two-stage pipeline.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub binary_preds: Vec<PredictionRecord>,
    /// Only for units with a positive binary verdict, in unit order.
    pub multi_preds: Vec<PredictionRecord>,
}

impl PipelineOutput {
    /// Final labels per unit: `{NOISSUE}` for a negative verdict, the
    /// multi-label decision otherwise.
    pub fn combined(&self) -> Vec<PredictionRecord> {
        let mut multi = self.multi_preds.iter();
        self.binary_preds
            .iter()
            .map(|b| {
                if b.is_positive() {
                    multi.next().cloned().expect("one multi-label record per positive verdict")
                } else {
                    PredictionRecord {
                        sample_id: b.sample_id.clone(),
                        scores: BTreeMap::new(),
                        decided_labels: BTreeSet::from([NO_ISSUE.to_string()]),
                    }
                }
            })
            .collect()
    }
}

fn format_all(units: &[&MethodUnit], fmt: InputFormat, opts: &TransformOptions) -> Result<Vec<FormattedSample>, ModelError> {
    units
        .iter()
        .map(|u| {
            apply_format(u, fmt, opts).map_err(|source| ModelError::Format {
                id: u.id.clone(),
                source,
            })
        })
        .collect()
}

/// Formats every unit as RJ for the binary model; units judged to have an
/// issue are formatted as RC+RJ and passed to the multi-label model.
pub fn run_pipeline(
    binary: &dyn Classifier,
    multi: &dyn Classifier,
    units: &[MethodUnit],
    opts: &TransformOptions,
) -> Result<PipelineOutput, ModelError> {
    if binary.spec().task != Task::Binary || multi.spec().task != Task::MultiLabel {
        return Err(ModelError::Spec("pipeline needs a binary and a multi-label classifier".into()));
    }
    let all: Vec<&MethodUnit> = units.iter().collect();
    let binary_preds = binary.predict(&format_all(&all, InputFormat::RJ, opts)?)?;
    let flagged: Vec<&MethodUnit> = units
        .iter()
        .zip(&binary_preds)
        .filter(|(_, p)| p.is_positive())
        .map(|(u, _)| u)
        .collect();
    let multi_preds = if flagged.is_empty() {
        Vec::new()
    } else {
        multi.predict(&format_all(&flagged, InputFormat::RC_RJ, opts)?)?
    };
    Ok(PipelineOutput {
        binary_preds,
        multi_preds,
    })
}
