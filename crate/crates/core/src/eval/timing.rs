use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::Write;
use std::time::Instant;

use log::warn;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::lintrun::{LintRun, RunStatus, Tool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Extraction,
    BinaryAnalysis,
    MultilabelAnalysis,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Extraction, Stage::BinaryAnalysis, Stage::MultilabelAnalysis];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Extraction => "extraction",
            Stage::BinaryAnalysis => "binary_analysis",
            Stage::MultilabelAnalysis => "multilabel_analysis",
        })
    }
}

/// Runs one stage of the approach on one project.
pub trait StageRunner {
    fn run(&mut self, project: &str, stage: Stage) -> Result<(), String>;
}

impl<F: FnMut(&str, Stage) -> Result<(), String>> StageRunner for F {
    fn run(&mut self, project: &str, stage: Stage) -> Result<(), String> {
        self(project, stage)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectTiming {
    pub project: String,
    /// Seconds per stage.
    pub stages: BTreeMap<Stage, f64>,
}

impl ProjectTiming {
    pub fn total(&self) -> f64 {
        self.stages.values().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub n: usize,
}

impl FiveNumber {
    /// Quartiles interpolate linearly between order statistics.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = (v.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(FiveNumber {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
            n: v.len(),
        })
    }
}

/// Mean analysis time of one linter, imported from its lint runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinterComparison {
    pub tool: String,
    pub projects: usize,
    pub mean_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<FiveNumber>,
}

impl LinterComparison {
    pub fn from_mean(tool: impl Into<String>, mean_seconds: f64) -> Self {
        LinterComparison {
            tool: tool.into(),
            projects: 0,
            mean_seconds,
            summary: None,
        }
    }

    /// One entry per tool over its successful runs.
    pub fn import(runs: &[LintRun]) -> Vec<Self> {
        let mut by_tool: BTreeMap<Tool, Vec<f64>> = BTreeMap::new();
        for r in runs.iter().filter(|r| r.status == RunStatus::Ok) {
            by_tool.entry(r.tool).or_default().push(r.duration_seconds);
        }
        by_tool
            .into_iter()
            .filter_map(|(tool, secs)| {
                let summary = FiveNumber::of(&secs)?;
                Some(LinterComparison {
                    tool: tool.to_string(),
                    projects: secs.len(),
                    mean_seconds: summary.mean,
                    summary: Some(summary),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimingReport {
    pub projects: Vec<ProjectTiming>,
    pub stages: BTreeMap<Stage, FiveNumber>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<FiveNumber>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linters: Vec<LinterComparison>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed: Vec<String>,
}

/// `(Σ linter means − approach) / Σ linter means × 100`.
pub fn speedup_percent(linter_means: &[f64], approach_seconds: f64) -> f64 {
    let sum: f64 = linter_means.iter().sum();
    (sum - approach_seconds) / sum * 100.0
}

/// Times every stage of every project, one at a time. A project whose
/// stage fails is left out of the summaries and listed in `failed`.
pub fn timing_bench(projects: &[String], runner: &mut dyn StageRunner) -> TimingReport {
    let mut report = TimingReport::default();
    'projects: for p in projects {
        let mut stages = BTreeMap::new();
        for stage in Stage::ALL {
            let start = Instant::now();
            if let Err(e) = runner.run(p, stage) {
                warn!("{p}: {stage} failed: {e}");
                report.failed.push(p.clone());
                continue 'projects;
            }
            stages.insert(stage, start.elapsed().as_secs_f64());
        }
        report.projects.push(ProjectTiming {
            project: p.clone(),
            stages,
        });
    }
    report.summarize();
    report
}

impl TimingReport {
    /// Builds a report from already measured per-project timings.
    pub fn from_timings(projects: Vec<ProjectTiming>) -> Self {
        let mut r = TimingReport {
            projects,
            ..Default::default()
        };
        r.summarize();
        r
    }

    fn summarize(&mut self) {
        self.stages = Stage::ALL
            .into_iter()
            .filter_map(|s| {
                let secs: Vec<f64> = self.projects.iter().filter_map(|p| p.stages.get(&s).copied()).collect();
                FiveNumber::of(&secs).map(|f| (s, f))
            })
            .collect();
        let totals: Vec<f64> = self.projects.iter().map(ProjectTiming::total).collect();
        self.total = FiveNumber::of(&totals);
    }

    /// Extraction, binary and multi-label run in sequence: the sum of the
    /// stage means.
    pub fn approach_seconds(&self) -> f64 {
        self.stages.values().map(|f| f.mean).sum()
    }

    /// Speedup against running every imported linter.
    pub fn speedup(&self) -> Option<f64> {
        if self.linters.is_empty() || self.projects.is_empty() {
            return None;
        }
        let means: Vec<f64> = self.linters.iter().map(|l| l.mean_seconds).collect();
        Some(speedup_percent(&means, self.approach_seconds()))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "projects timed: {}", self.projects.len());
        for (stage, f) in &self.stages {
            let _ = writeln!(out, "{stage}: mean {:.3} s, median {:.3} s", f.mean, f.median);
        }
        if self.projects.is_empty() {
            return out;
        }
        let approach = self.approach_seconds();
        let _ = writeln!(out, "approach total: {approach:.3} s");
        for l in &self.linters {
            let _ = writeln!(
                out,
                "{}: mean {:.3} s, approach is {:.2}% faster",
                l.tool,
                l.mean_seconds,
                speedup_percent(&[l.mean_seconds], approach)
            );
        }
        if let Some(s) = self.speedup().filter(|_| self.linters.len() > 1) {
            let _ = writeln!(out, "all linters: approach is {s:.2}% faster");
        }
        out
    }

    /// One row per box: stages, the approach total and each linter.
    pub fn write_boxplot_csv(&self, w: impl Write) -> Result<(), EvalError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["series", "n", "min", "q1", "median", "q3", "max", "mean"])?;
        let mut rows: Vec<(String, FiveNumber)> = self.stages.iter().map(|(s, f)| (s.to_string(), *f)).collect();
        rows.extend(self.total.map(|f| ("total".to_string(), f)));
        rows.extend(self.linters.iter().filter_map(|l| l.summary.map(|f| (l.tool.clone(), f))));
        for (name, f) in rows {
            out.write_record([
                name,
                f.n.to_string(),
                format!("{:.3}", f.min),
                format!("{:.3}", f.q1),
                format!("{:.3}", f.median),
                format!("{:.3}", f.q3),
                format!("{:.3}", f.max),
                format!("{:.3}", f.mean),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
