use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use log::debug;

use super::protocol::{header_for, read_response, write_request, RequestRow};
use super::{Classifier, ClassifierSpec, ModelError, PredictionRecord, DEFAULT_THRESHOLD};
use crate::transform::{FormattedSample, InputFormat};

/// A model served by another program, driven through request and response
/// files:
///
/// ```text
/// <program> [args..] --train <request> --model <dir> [--val <request>]
/// <program> [args..] --predict <request> --model <dir> --out <response>
/// ```
#[derive(Debug, Clone)]
pub struct ExternalBackend {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub model_dir: PathBuf,
    /// Scratch directory for request/response files.
    pub work_dir: PathBuf,
    pub spec: ClassifierSpec,
    pub threshold: f64,
}

impl ExternalBackend {
    pub fn new(program: impl Into<PathBuf>, model_dir: impl Into<PathBuf>, work_dir: impl Into<PathBuf>, spec: ClassifierSpec) -> Self {
        ExternalBackend {
            program: program.into(),
            args: Vec::new(),
            model_dir: model_dir.into(),
            work_dir: work_dir.into(),
            spec,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    fn run(&self, extra: &[&std::ffi::OsStr]) -> Result<(), ModelError> {
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.args).args(extra);
        debug!("running {cmd:?}");
        let out = cmd
            .output()
            .map_err(|e| ModelError::Backend(format!("{}: {e}", self.program.display())))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            let tail: String = stderr.lines().rev().take(5).collect::<Vec<_>>().into_iter().rev().collect::<Vec<_>>().join("\n");
            return Err(ModelError::Backend(format!("{} exited with {}: {tail}", self.program.display(), out.status)));
        }
        Ok(())
    }

    fn rows(&self, samples: &[(FormattedSample, BTreeSet<String>)]) -> Result<Vec<RequestRow>, ModelError> {
        samples
            .iter()
            .map(|(s, l)| {
                Ok(RequestRow {
                    sample: s.clone(),
                    labels: Some(self.spec.targets(&s.method_id, l)?),
                })
            })
            .collect()
    }

    fn format_of(samples: &[FormattedSample]) -> Result<InputFormat, ModelError> {
        let fmt = samples.first().map(|s| s.format).unwrap_or_default();
        if samples.iter().any(|s| s.format != fmt) {
            return Err(ModelError::Protocol("request mixes input formats".into()));
        }
        Ok(fmt)
    }

    pub fn train(
        &self,
        train: &[(FormattedSample, BTreeSet<String>)],
        val: &[(FormattedSample, BTreeSet<String>)],
    ) -> Result<(), ModelError> {
        if train.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let io = |e: std::io::Error| ModelError::Io(e.to_string());
        std::fs::create_dir_all(&self.work_dir).map_err(io)?;
        std::fs::create_dir_all(&self.model_dir).map_err(io)?;
        let all: Vec<FormattedSample> = train.iter().chain(val).map(|(s, _)| s.clone()).collect();
        let header = header_for(&self.spec, Self::format_of(&all)?);
        let train_req = self.work_dir.join("train.request.jsonl");
        write_request(&train_req, &header, &self.rows(train)?)?;
        let mut args = vec![
            "--train".as_ref(),
            train_req.as_os_str(),
            "--model".as_ref(),
            self.model_dir.as_os_str(),
        ];
        let val_req = self.work_dir.join("val.request.jsonl");
        if !val.is_empty() {
            write_request(&val_req, &header, &self.rows(val)?)?;
            args.extend(["--val".as_ref(), val_req.as_os_str()]);
        }
        self.run(&args)
    }

    fn request_paths(&self) -> (PathBuf, PathBuf) {
        (
            self.work_dir.join("predict.request.jsonl"),
            self.work_dir.join("predict.response.jsonl"),
        )
    }

    pub fn model_dir(&self) -> &Path {
        &self.model_dir
    }
}

impl Classifier for ExternalBackend {
    fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    fn predict(&self, samples: &[FormattedSample]) -> Result<Vec<PredictionRecord>, ModelError> {
        std::fs::create_dir_all(&self.work_dir).map_err(|e| ModelError::Io(e.to_string()))?;
        let (req, resp) = self.request_paths();
        let _ = std::fs::remove_file(&resp);
        let header = header_for(&self.spec, Self::format_of(samples)?);
        let rows: Vec<RequestRow> = samples
            .iter()
            .map(|s| RequestRow {
                sample: s.clone(),
                labels: None,
            })
            .collect();
        write_request(&req, &header, &rows)?;
        self.run(&[
            "--predict".as_ref(),
            req.as_os_str(),
            "--model".as_ref(),
            self.model_dir.as_os_str(),
            "--out".as_ref(),
            resp.as_os_str(),
        ])?;
        let ids: Vec<String> = samples.iter().map(|s| s.method_id.clone()).collect();
        read_response(&resp, &self.spec, &ids, self.threshold)
    }
}
