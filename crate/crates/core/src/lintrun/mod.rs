//! Running external static analyzers over Maven projects.
//!
//! [`run_analysis`] walks a retry ladder: the root pom with its declared
//! Java version, then the other Java versions, then every other pom in the
//! project the same way. A timeout ends the ladder immediately; any other
//! failure moves on to the next configuration.

mod process;
pub mod reports;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

pub use process::{MavenExecutor, Toolchain};
pub use reports::{parse_infer_report, parse_spotbugs_report, ParsedReport, ReportError, TypeMapping};

pub const DEFAULT_TIMEOUT_SECS: u64 = 25 * 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Tool {
    Infer,
    Spotbugs,
}

impl Tool {
    pub fn id_prefix(self) -> &'static str {
        match self {
            Tool::Infer => "I",
            Tool::Spotbugs => "S",
        }
    }
}

impl fmt::Display for Tool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tool::Infer => "infer",
            Tool::Spotbugs => "spotbugs",
        })
    }
}

impl FromStr for Tool {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "infer" => Ok(Tool::Infer),
            "spotbugs" => Ok(Tool::Spotbugs),
            other => Err(format!("unknown tool {other:?} (expected infer or spotbugs)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum JavaVersion {
    V8,
    V11,
    V17,
}

impl JavaVersion {
    pub const ALL: [JavaVersion; 3] = [JavaVersion::V8, JavaVersion::V11, JavaVersion::V17];

    pub fn number(self) -> u8 {
        match self {
            JavaVersion::V8 => 8,
            JavaVersion::V11 => 11,
            JavaVersion::V17 => 17,
        }
    }

    /// Nearest supported toolchain for a declared source level.
    pub fn for_source_level(level: u32) -> Self {
        match level {
            0..=8 => JavaVersion::V8,
            9..=11 => JavaVersion::V11,
            _ => JavaVersion::V17,
        }
    }
}

impl From<JavaVersion> for u8 {
    fn from(v: JavaVersion) -> u8 {
        v.number()
    }
}

impl TryFrom<u8> for JavaVersion {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            8 => Ok(JavaVersion::V8),
            11 => Ok(JavaVersion::V11),
            17 => Ok(JavaVersion::V17),
            other => Err(format!("unsupported Java version {other}")),
        }
    }
}

impl fmt::Display for JavaVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Ok,
    Timeout,
    BuildFail,
    ToolFail,
}

/// One normalized analyzer finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueRecord {
    pub tool: Tool,
    pub type_id: String,
    pub path: String,
    pub line: usize,
    #[serde(default)]
    pub message: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub project: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub java_version: JavaVersion,
    pub pom_path: String,
    pub status: RunStatus,
    pub duration_seconds: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub diagnostics: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LintRun {
    pub project: String,
    pub tool: Tool,
    pub java_version: JavaVersion,
    /// Pom of the reported attempt, relative to the project root.
    pub pom_path: String,
    pub status: RunStatus,
    /// Wall time summed over all attempts.
    pub duration_seconds: f64,
    pub attempts: Vec<Attempt>,
    #[serde(default)]
    pub unknown_types: usize,
    #[serde(default)]
    pub dropped_findings: usize,
}

/// What a single build+analysis attempt produced.
#[derive(Debug, Clone)]
pub struct AttemptOutcome {
    pub status: RunStatus,
    /// Raw report bytes when the tool finished.
    pub report: Option<Vec<u8>>,
    pub diagnostics: String,
    pub duration: Duration,
}

/// Runs one build+analysis configuration. The production implementation is
/// [`MavenExecutor`]; tests substitute scripted executors.
pub trait AnalysisExecutor: Sync {
    fn attempt(
        &self,
        project_dir: &Path,
        tool: Tool,
        java: JavaVersion,
        pom: &Path,
        timeout: Duration,
    ) -> AttemptOutcome;
}

/// Source level declared by a pom, from the usual compiler properties.
pub fn declared_java_version(pom_xml: &str) -> Option<JavaVersion> {
    const TAGS: &[&str] = &[
        "maven.compiler.release",
        "maven.compiler.source",
        "java.version",
        "release",
        "source",
        "maven.compiler.target",
        "target",
    ];
    for tag in TAGS {
        let Some(raw) = tag_text(pom_xml, tag) else {
            continue;
        };
        let value = match raw.strip_prefix("${").and_then(|r| r.strip_suffix('}')) {
            Some(prop) => match tag_text(pom_xml, prop) {
                Some(v) => v,
                None => continue,
            },
            None => raw,
        };
        let value = value.trim();
        let level = value.strip_prefix("1.").unwrap_or(value);
        if let Ok(n) = level.parse::<u32>() {
            return Some(JavaVersion::for_source_level(n));
        }
    }
    None
}

fn tag_text<'a>(xml: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = xml.find(&open)? + open.len();
    let end = start + xml[start..].find(&close)?;
    Some(xml[start..end].trim())
}

/// Poms in `project_dir`: the root pom first, then the others in path order.
/// Build output and hidden directories are skipped.
pub fn discover_poms(project_dir: &Path) -> Vec<PathBuf> {
    let root = project_dir.join("pom.xml");
    let mut others: Vec<PathBuf> = WalkDir::new(project_dir)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            let name = e.file_name().to_string_lossy();
            e.depth() == 0 || !(name.starts_with('.') || name == "target" || name == "infer-out")
        })
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.file_name() == "pom.xml")
        .map(|e| e.into_path())
        .filter(|p| *p != root)
        .collect();
    others.sort();
    let mut out = Vec::with_capacity(others.len() + 1);
    if root.is_file() {
        out.push(root);
    }
    out.extend(others);
    out
}

/// The ordered (pom, java version) configurations to try. Each pom starts
/// with its declared version; no pair appears twice.
pub fn plan_attempts(project_dir: &Path) -> Vec<(PathBuf, JavaVersion)> {
    let mut plan = Vec::new();
    for pom in discover_poms(project_dir) {
        let declared = std::fs::read_to_string(&pom)
            .ok()
            .and_then(|xml| declared_java_version(&xml))
            .unwrap_or(JavaVersion::V8);
        plan.push((pom.clone(), declared));
        for v in JavaVersion::ALL {
            if v != declared {
                plan.push((pom.clone(), v));
            }
        }
    }
    plan
}

fn relative(project_dir: &Path, p: &Path) -> String {
    p.strip_prefix(project_dir)
        .unwrap_or(p)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Runs `tool` over the project through the retry ladder and returns the
/// first successful run's issues, or the last failure.
pub fn run_analysis(
    project: &str,
    project_dir: &Path,
    tool: Tool,
    timeout: Duration,
    executor: &dyn AnalysisExecutor,
    mapping: &TypeMapping,
) -> (LintRun, Vec<IssueRecord>) {
    let plan = plan_attempts(project_dir);
    let mut run = LintRun {
        project: project.to_string(),
        tool,
        java_version: plan.first().map(|(_, v)| *v).unwrap_or(JavaVersion::V8),
        pom_path: "pom.xml".to_string(),
        status: RunStatus::BuildFail,
        duration_seconds: 0.0,
        attempts: Vec::new(),
        unknown_types: 0,
        dropped_findings: 0,
    };
    if plan.is_empty() {
        warn!("{project}: no pom.xml found");
        run.attempts.clear();
        return (run, Vec::new());
    }

    for (pom, java) in plan {
        let pom_rel = relative(project_dir, &pom);
        info!("{project}: {tool} with Java {java} on {pom_rel}");
        let outcome = executor.attempt(project_dir, tool, java, &pom, timeout);
        let mut status = outcome.status;
        let mut diagnostics = outcome.diagnostics;
        let mut parsed = None;
        if status == RunStatus::Ok {
            let result = match &outcome.report {
                None => Err("analysis finished without a report".to_string()),
                Some(bytes) => match tool {
                    Tool::Infer => parse_infer_report(bytes, mapping),
                    Tool::Spotbugs => parse_spotbugs_report(bytes, mapping),
                }
                .map_err(|e| e.to_string()),
            };
            match result {
                Ok(p) => parsed = Some(p),
                Err(e) => {
                    status = RunStatus::ToolFail;
                    diagnostics = e;
                }
            }
        }
        let secs = outcome.duration.as_secs_f64();
        run.duration_seconds += secs;
        run.java_version = java;
        run.pom_path = pom_rel.clone();
        run.status = status;
        run.attempts.push(Attempt {
            java_version: java,
            pom_path: pom_rel,
            status,
            duration_seconds: secs,
            diagnostics,
        });
        match status {
            RunStatus::Ok => {
                let parsed = parsed.expect("parsed on success");
                run.unknown_types = parsed.unknown_types.values().sum();
                run.dropped_findings = parsed.dropped;
                let issues = parsed
                    .issues
                    .into_iter()
                    .map(|mut i| {
                        i.project = project.to_string();
                        i
                    })
                    .collect();
                return (run, issues);
            }
            RunStatus::Timeout => {
                warn!("{project}: {tool} timed out after {}s", timeout.as_secs());
                return (run, Vec::new());
            }
            RunStatus::BuildFail | RunStatus::ToolFail => {}
        }
    }
    (run, Vec::new())
}
