//! Batch-file exchange with external model backends.
//!
//! A request file starts with one header line `{task, label_ids, format}`
//! followed by one formatted sample per line. Training requests also carry
//! each sample's `labels`. A response file holds one prediction record per
//! requested sample with a score for every label id.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{decide, ClassifierSpec, ModelError, PredictionRecord, Task};
use crate::transform::{FormattedSample, InputFormat};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestHeader {
    pub task: Task,
    pub label_ids: Vec<String>,
    pub format: InputFormat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRow {
    #[serde(flatten)]
    pub sample: FormattedSample,
    /// Expected decided labels; present in training requests only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeSet<String>>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ModelError + '_ {
    move |e| ModelError::Io(format!("{}: {e}", path.display()))
}

pub fn write_request(path: &Path, header: &RequestHeader, rows: &[RequestRow]) -> Result<(), ModelError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let json = |e: serde_json::Error| ModelError::Io(e.to_string());
    let mut lines = vec![serde_json::to_string(header).map_err(json)?];
    for r in rows {
        lines.push(serde_json::to_string(r).map_err(json)?);
    }
    for l in lines {
        w.write_all(l.as_bytes()).map_err(io_err(path))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_request(path: &Path) -> Result<(RequestHeader, Vec<RequestRow>), ModelError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let protocol = |line: usize, reason: String| ModelError::Protocol(format!("{}:{line}: {reason}", path.display()));
    let header = loop {
        match lines.next() {
            None => return Err(protocol(1, "missing header line".into())),
            Some((i, l)) => {
                let l = l.map_err(io_err(path))?;
                if !l.trim().is_empty() {
                    break serde_json::from_str::<RequestHeader>(&l).map_err(|e| protocol(i + 1, e.to_string()))?;
                }
            }
        }
    };
    let mut rows = Vec::new();
    for (i, l) in lines {
        let l = l.map_err(io_err(path))?;
        if l.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&l).map_err(|e| protocol(i + 1, e.to_string()))?);
    }
    Ok((header, rows))
}

pub fn write_response(path: &Path, records: &[PredictionRecord]) -> Result<(), ModelError> {
    crate::jsonl::write(path, records).map_err(|e| ModelError::Io(e.to_string()))
}

/// Reads a response and checks it against the request: every requested id
/// answered once, complete score maps with finite scores in [0, 1]. Records
/// come back in request order. Missing decided labels are derived from the
/// scores at `threshold`.
pub fn read_response(
    path: &Path,
    spec: &ClassifierSpec,
    requested: &[String],
    threshold: f64,
) -> Result<Vec<PredictionRecord>, ModelError> {
    let records: Vec<PredictionRecord> =
        crate::jsonl::read(path).map_err(|e| ModelError::Protocol(e.to_string()))?;
    validate_response(records, spec, requested, threshold)
}

pub fn validate_response(
    records: Vec<PredictionRecord>,
    spec: &ClassifierSpec,
    requested: &[String],
    threshold: f64,
) -> Result<Vec<PredictionRecord>, ModelError> {
    let wanted: HashMap<&str, usize> = requested.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut slots: Vec<Option<PredictionRecord>> = vec![None; requested.len()];
    for mut r in records {
        let &slot = wanted
            .get(r.sample_id.as_str())
            .ok_or_else(|| ModelError::UnexpectedSample(r.sample_id.clone()))?;
        if slots[slot].is_some() {
            return Err(ModelError::Protocol(format!("sample {} answered twice", r.sample_id)));
        }
        for label in &spec.label_ids {
            match r.scores.get(label) {
                None => {
                    return Err(ModelError::Protocol(format!(
                        "sample {} has no score for label {label}",
                        r.sample_id
                    )))
                }
                Some(s) if !(0.0..=1.0).contains(s) => {
                    return Err(ModelError::Protocol(format!(
                        "sample {} label {label}: score {s} outside [0, 1]",
                        r.sample_id
                    )))
                }
                _ => {}
            }
        }
        if r.scores.len() != spec.label_ids.len() {
            return Err(ModelError::Protocol(format!("sample {} scores unknown labels", r.sample_id)));
        }
        if r.decided_labels.is_empty() {
            r.decided_labels = decide(spec.task, &r.scores, threshold);
        } else if let Some(bad) = r.decided_labels.iter().find(|l| !spec.label_ids.contains(l)) {
            return Err(ModelError::Protocol(format!("sample {} decided unknown label {bad}", r.sample_id)));
        }
        slots[slot] = Some(r);
    }
    slots
        .into_iter()
        .zip(requested)
        .map(|(r, id)| r.ok_or_else(|| ModelError::MissingSample(id.clone())))
        .collect()
}

pub(crate) fn header_for(spec: &ClassifierSpec, format: InputFormat) -> RequestHeader {
    RequestHeader {
        task: spec.task,
        label_ids: spec.label_ids.clone(),
        format,
    }
}
