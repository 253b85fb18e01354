//! Labeled dataset assembly: issue-to-method mapping, equivalence groups,
//! frequency filtering, negative balancing and splits.

mod filter;
mod split;
mod vocab;

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::extract::{locate_method, MethodUnit};
use crate::lintrun::{IssueRecord, LintRun, RunStatus};

pub use filter::{frequency_filter, label_frequencies, select_labels, Filtered, Threshold};
pub use split::{
    balance_negatives, split_counts, split_default, split_project_heldout, HeldoutSummary, SplitMode,
    DEFAULT_HELDOUT_FRACTION,
};
pub use vocab::{apply_equivalence, LabelVocabulary, NO_ISSUE};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown issue id {0}")]
    UnknownLabel(String),
    #[error("invalid label vocabulary: {0}")]
    Vocabulary(String),
    #[error("coverage fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("invalid threshold {0:?}, expected coverage:<fraction> or mincount:<n>")]
    BadThreshold(String),
    #[error("invalid split mode {0:?}, expected default or project-heldout")]
    BadSplitMode(String),
    #[error("invalid split {0:?}, expected TRAIN, VAL, TEST, HELDOUT or UNASSIGNED")]
    BadSplit(String),
    #[error("not enough methods without issues: need {required}, have {available}")]
    InsufficientNegatives { required: usize, available: usize },
    #[error("project held-out split needs both CSN and non-CSN projects")]
    EmptyPool,
    #[error("project pool exhausted after withholding {achieved:.4} of the samples (target {target})")]
    PoolExhausted { achieved: f64, target: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Split {
    Train,
    Val,
    Test,
    Heldout,
    #[default]
    Unassigned,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "TRAIN",
            Split::Val => "VAL",
            Split::Test => "TEST",
            Split::Heldout => "HELDOUT",
            Split::Unassigned => "UNASSIGNED",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "TRAIN" => Ok(Split::Train),
            "VAL" => Ok(Split::Val),
            "TEST" => Ok(Split::Test),
            "HELDOUT" => Ok(Split::Heldout),
            "UNASSIGNED" => Ok(Split::Unassigned),
            _ => Err(DatasetError::BadSplit(s.to_string())),
        }
    }
}

/// A method with its label set. `id` is the method unit id; `text_ref`
/// locates the method in the project checkout.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabeledSample {
    pub id: String,
    pub project: String,
    pub in_csn: bool,
    #[serde(default)]
    pub split: Split,
    pub labels: BTreeSet<String>,
    #[serde(default)]
    pub text_ref: String,
}

impl LabeledSample {
    pub fn from_unit(unit: &MethodUnit, in_csn: bool) -> Self {
        LabeledSample {
            id: unit.id.clone(),
            project: unit.project.clone(),
            in_csn,
            split: Split::Unassigned,
            labels: BTreeSet::new(),
            text_ref: format!("{}:{}-{}", unit.path, unit.start_line, unit.end_line),
        }
    }

    pub fn has_issue(&self) -> bool {
        !self.labels.is_empty()
    }
}

/// Result of [`map_issues_to_methods`]: one sample per unit, labels are the
/// issues' own ids.
#[derive(Debug, Clone, Default)]
pub struct Mapping {
    pub samples: Vec<LabeledSample>,
    pub matched: usize,
    /// Findings outside every method, or in a file that is not among the units.
    pub discarded: usize,
    /// Findings whose path suffix matched more than one file.
    pub ambiguous: usize,
}

fn path_matches(unit_path: &str, issue_path: &str) -> bool {
    let issue_path = issue_path.trim_start_matches("./");
    unit_path == issue_path
        || (unit_path.len() > issue_path.len()
            && unit_path.ends_with(issue_path)
            && unit_path.as_bytes()[unit_path.len() - issue_path.len() - 1] == b'/')
}

/// Attributes each finding to the innermost method containing its line.
///
/// Analyzers report paths relative to different roots (project, module,
/// or source directory), so a finding's path matches any unit path it is a
/// component-wise suffix of. An exact match wins over suffix matches.
pub fn map_issues_to_methods(units: &[MethodUnit], issues: &[IssueRecord], in_csn: bool) -> Mapping {
    let sorted: Cow<[MethodUnit]> = if units.windows(2).all(|w| w[0].path <= w[1].path) {
        Cow::Borrowed(units)
    } else {
        let mut v = units.to_vec();
        v.sort_by(|a, b| a.path.cmp(&b.path));
        Cow::Owned(v)
    };
    let mut files: BTreeMap<&str, std::ops::Range<usize>> = BTreeMap::new();
    for (i, u) in sorted.iter().enumerate() {
        files.entry(u.path.as_str()).or_insert(i..i).end = i + 1;
    }
    let mut samples: Vec<LabeledSample> = sorted.iter().map(|u| LabeledSample::from_unit(u, in_csn)).collect();
    let mut out = Mapping::default();
    for issue in issues {
        let mut candidates = files.iter().filter(|(p, _)| path_matches(p, &issue.path));
        let file = match (candidates.next(), candidates.next()) {
            (Some(only), None) => Some(only),
            (Some(_), Some(_)) => files.get_key_value(issue.path.as_str()).or_else(|| {
                out.ambiguous += 1;
                None
            }),
            _ => None,
        };
        let hit = file.and_then(|(path, range)| {
            let slice = &sorted[range.clone()];
            let found = locate_method(slice, path, issue.line)?;
            slice.iter().position(|u| std::ptr::eq(u, found)).map(|k| range.start + k)
        });
        match hit {
            Some(i) => {
                samples[i].labels.insert(issue.type_id.clone());
                out.matched += 1;
            }
            None => out.discarded += 1,
        }
    }
    out.samples = samples;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub balance_seed: u64,
    pub split_seed: u64,
}

/// Reproducibility record for one dataset build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub vocabulary: LabelVocabulary,
    pub threshold_config: Threshold,
    pub seeds: Seeds,
    pub split_mode: SplitMode,
    pub split_counts: BTreeMap<Split, usize>,
    pub total: usize,
    /// sha256 over every sample's id, split and labels, in id order.
    pub membership_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heldout: Option<HeldoutSummary>,
    #[serde(default)]
    pub notes: Vec<String>,
}

pub fn membership_hash(samples: &[LabeledSample]) -> String {
    let mut order: Vec<&LabeledSample> = samples.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let mut h = Sha256::new();
    for s in order {
        h.update(s.id.as_bytes());
        h.update([0]);
        h.update(s.split.to_string().as_bytes());
        for l in &s.labels {
            h.update([0]);
            h.update(l.as_bytes());
        }
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything known about one project going into a dataset build.
#[derive(Debug, Clone, Default)]
pub struct ProjectInput {
    pub name: String,
    pub in_csn: bool,
    pub units: Vec<MethodUnit>,
    pub issues: Vec<IssueRecord>,
    /// True when every analyzer run on the project finished OK. Only such
    /// projects contribute methods without issues.
    pub analyses_ok: bool,
}

impl ProjectInput {
    /// Groups flat unit/issue/run tables by project name. Projects absent
    /// from `in_csn` are treated as non-CSN.
    pub fn group(
        units: Vec<MethodUnit>,
        issues: Vec<IssueRecord>,
        runs: &[LintRun],
        in_csn: &HashMap<String, bool>,
    ) -> Vec<ProjectInput> {
        let mut by_name: BTreeMap<String, ProjectInput> = BTreeMap::new();
        fn entry<'m>(
            by_name: &'m mut BTreeMap<String, ProjectInput>,
            in_csn: &HashMap<String, bool>,
            name: &str,
        ) -> &'m mut ProjectInput {
            by_name.entry(name.to_string()).or_insert_with(|| ProjectInput {
                name: name.to_string(),
                in_csn: in_csn.get(name).copied().unwrap_or(false),
                analyses_ok: true,
                ..Default::default()
            })
        }
        for u in units {
            entry(&mut by_name, in_csn, &u.project.clone()).units.push(u);
        }
        for i in issues {
            entry(&mut by_name, in_csn, &i.project.clone()).issues.push(i);
        }
        let mut analyzed: BTreeSet<&str> = BTreeSet::new();
        for r in runs {
            analyzed.insert(&r.project);
            if r.status != RunStatus::Ok {
                entry(&mut by_name, in_csn, &r.project).analyses_ok = false;
            }
        }
        by_name
            .into_values()
            .map(|mut p| {
                p.analyses_ok &= analyzed.contains(p.name.as_str());
                p
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildConfig {
    pub threshold: Threshold,
    pub balance_seed: u64,
    pub split_seed: u64,
    pub split: SplitMode,
    pub heldout_fraction: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            threshold: Threshold::default(),
            balance_seed: 0,
            split_seed: 0,
            split: SplitMode::Default,
            heldout_fraction: DEFAULT_HELDOUT_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BuildStats {
    pub projects: usize,
    pub units: usize,
    pub matched_findings: usize,
    pub discarded_findings: usize,
    pub ambiguous_findings: usize,
    /// Findings whose bug type was missing from the mapping tables.
    pub unknown_type_findings: usize,
    pub with_issue_before_filter: usize,
    pub emptied_by_filter: usize,
    pub negative_pool: usize,
}

#[derive(Debug, Clone)]
pub struct BuiltDataset {
    pub samples: Vec<LabeledSample>,
    pub manifest: DatasetManifest,
    pub stats: BuildStats,
}

fn is_unknown_type(id: &str) -> bool {
    id.ends_with('?')
}

/// Maps, filters, balances and splits.
pub fn build_dataset(
    projects: &[ProjectInput],
    vocab: &LabelVocabulary,
    cfg: &BuildConfig,
) -> Result<BuiltDataset, DatasetError> {
    cfg.threshold.validate()?;
    let mapped: Vec<(Mapping, usize, bool)> = projects
        .par_iter()
        .map(|p| {
            let known: Vec<IssueRecord> = p.issues.iter().filter(|i| !is_unknown_type(&i.type_id)).cloned().collect();
            let unknown = p.issues.len() - known.len();
            (map_issues_to_methods(&p.units, &known, p.in_csn), unknown, p.analyses_ok)
        })
        .collect();

    let mut stats = BuildStats {
        projects: projects.len(),
        ..Default::default()
    };
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (m, unknown, ok) in mapped {
        stats.units += m.samples.len();
        stats.matched_findings += m.matched;
        stats.discarded_findings += m.discarded;
        stats.ambiguous_findings += m.ambiguous;
        stats.unknown_type_findings += unknown;
        for mut s in m.samples {
            if s.has_issue() {
                s.labels = apply_equivalence(s.labels.iter().map(String::as_str), vocab)?;
                positives.push(s);
            } else if ok {
                negatives.push(s);
            }
        }
    }
    if stats.unknown_type_findings > 0 {
        warn!("{} findings with unmapped bug types were dropped", stats.unknown_type_findings);
    }
    stats.with_issue_before_filter = positives.len();
    stats.negative_pool = negatives.len();

    let filtered = frequency_filter(positives, cfg.threshold, vocab)?;
    stats.emptied_by_filter = filtered.emptied;
    let mut samples = balance_negatives(filtered.samples, negatives, cfg.balance_seed)?;

    let heldout = match cfg.split {
        SplitMode::Default => {
            split_default(&mut samples, cfg.split_seed);
            None
        }
        SplitMode::ProjectHeldout => Some(split_project_heldout(&mut samples, cfg.split_seed, cfg.heldout_fraction)?),
    };
    let manifest = DatasetManifest {
        vocabulary: filtered.vocabulary,
        threshold_config: cfg.threshold,
        seeds: Seeds {
            balance_seed: cfg.balance_seed,
            split_seed: cfg.split_seed,
        },
        split_mode: cfg.split,
        split_counts: split_counts(&samples),
        total: samples.len(),
        membership_hash: membership_hash(&samples),
        heldout,
        notes: vec![
            format!("{} findings outside any method were discarded", stats.discarded_findings),
            format!("{} findings with unmapped bug types were dropped", stats.unknown_type_findings),
        ],
    };
    Ok(BuiltDataset {
        samples,
        manifest,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::extract_methods;
    use crate::fixtures::PRINTER_METHOD;
    use crate::lintrun::Tool;

    fn issue(path: &str, line: usize, id: &str) -> IssueRecord {
        IssueRecord {
            tool: if id.starts_with('I') { Tool::Infer } else { Tool::Spotbugs },
            type_id: id.into(),
            path: path.into(),
            line,
            message: String::new(),
            project: "p".into(),
        }
    }

    fn five_line_method() -> Vec<MethodUnit> {
        let src = "class A {\n    int f;\n\n    void m() {\n        a();\n        b();\n        c();\n    }\n\n    int g;\n    int h;\n}\n";
        extract_methods("src/A.java", "p", src).unwrap()
    }

    #[test]
    fn containment_and_discard() {
        let units = five_line_method();
        assert_eq!((units[0].start_line, units[0].end_line), (4, 8));
        let m = map_issues_to_methods(&units, &[issue("src/A.java", 6, "S8"), issue("src/A.java", 11, "S8")], false);
        assert_eq!(m.samples.len(), 1);
        assert_eq!(m.samples[0].labels.len(), 1);
        assert_eq!((m.matched, m.discarded), (1, 1));
    }

    #[test]
    fn duplicate_findings_collapse() {
        let units = five_line_method();
        let m = map_issues_to_methods(&units, &[issue("src/A.java", 5, "S8"), issue("src/A.java", 6, "S8")], false);
        assert_eq!(m.samples[0].labels, BTreeSet::from(["S8".to_string()]));
    }

    #[test]
    fn printer_null_dereference_is_e1() {
        let units = extract_methods("Printer.java", "p", PRINTER_METHOD).unwrap();
        let m = map_issues_to_methods(&units, &[issue("Printer.java", 8, "I1")], true);
        let v = LabelVocabulary::builtin();
        let labels = apply_equivalence(m.samples[0].labels.iter().map(String::as_str), &v).unwrap();
        assert_eq!(labels, BTreeSet::from(["E1".to_string()]));
    }

    #[test]
    fn suffix_paths() {
        let units = five_line_method();
        // SpotBugs reports paths relative to the source root
        let m = map_issues_to_methods(&units, &[issue("A.java", 6, "S8"), issue("rc/A.java", 6, "S8")], false);
        assert_eq!((m.matched, m.discarded), (1, 1));

        let mut two = units.clone();
        let mut other = units[0].clone();
        other.path = "test/A.java".into();
        two.push(other);
        let m = map_issues_to_methods(&two, &[issue("A.java", 6, "S8"), issue("test/A.java", 6, "S8")], false);
        assert_eq!((m.matched, m.ambiguous), (1, 1));
        assert!(m.samples.iter().any(|s| s.text_ref.starts_with("test/") && s.has_issue()));
    }

    #[test]
    fn nested_goes_to_innermost() {
        let src = "class A {\n  void outer() {\n    Runnable r = new Runnable() {\n      public void run() {\n        x();\n      }\n    };\n    y();\n  }\n}\n";
        let units = extract_methods("A.java", "p", src).unwrap();
        assert_eq!(units.len(), 2);
        let m = map_issues_to_methods(&units, &[issue("A.java", 5, "S1"), issue("A.java", 8, "S8")], false);
        let by_start: BTreeMap<_, _> = m.samples.iter().map(|s| (s.text_ref.clone(), s.labels.clone())).collect();
        assert_eq!(by_start["A.java:2-9"], BTreeSet::from(["S8".to_string()]));
        assert_eq!(by_start["A.java:4-6"], BTreeSet::from(["S1".to_string()]));
    }

    fn synthetic_project(name: &str, csn: bool, methods: usize, issues_every: usize) -> ProjectInput {
        let mut src = String::from("class A {\n");
        for i in 0..methods {
            src.push_str(&format!("  void m{i}() {{\n    x();\n  }}\n"));
        }
        src.push_str("}\n");
        let units = extract_methods("A.java", name, &src).unwrap();
        let issues = units
            .iter()
            .enumerate()
            .filter(|(i, _)| i % issues_every == 0)
            .map(|(i, u)| issue("A.java", u.start_line + 1, if i % 2 == 0 { "I1" } else { "S8" }))
            .collect();
        ProjectInput {
            name: name.into(),
            in_csn: csn,
            units,
            issues,
            analyses_ok: true,
        }
    }

    #[test]
    fn build_is_reproducible() {
        let projects: Vec<_> = (0..6).map(|i| synthetic_project(&format!("p{i}"), i % 2 == 0, 30, 3)).collect();
        let cfg = BuildConfig {
            threshold: Threshold::MinCount(1),
            balance_seed: 4,
            split_seed: 9,
            ..Default::default()
        };
        let v = LabelVocabulary::builtin();
        let a = build_dataset(&projects, &v, &cfg).unwrap();
        let b = build_dataset(&projects, &v, &cfg).unwrap();
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.manifest.total, 2 * a.stats.with_issue_before_filter);
        assert_eq!(a.manifest.split_counts.values().sum::<usize>(), a.manifest.total);
        let labels: BTreeSet<_> = a.samples.iter().flat_map(|s| s.labels.iter().cloned()).collect();
        assert_eq!(labels, BTreeSet::from(["E1".to_string(), "S8".to_string()]));
        assert!(labels.is_subset(&a.manifest.vocabulary.effective_ids));
    }

    #[test]
    fn failed_projects_give_no_negatives() {
        let mut projects = vec![synthetic_project("ok", true, 12, 3), synthetic_project("bad", false, 40, 40)];
        projects[1].analyses_ok = false;
        let cfg = BuildConfig {
            threshold: Threshold::MinCount(1),
            ..Default::default()
        };
        let built = build_dataset(&projects, &LabelVocabulary::builtin(), &cfg).unwrap();
        assert!(built.samples.iter().filter(|s| !s.has_issue()).all(|s| s.project == "ok"));
        assert_eq!(built.stats.negative_pool, 8);
        assert_eq!(built.samples.len(), 10);
    }

    #[test]
    fn group_marks_failed_and_unanalyzed() {
        let units = synthetic_project("a", true, 2, 1).units;
        let mut more = synthetic_project("b", false, 2, 1).units;
        more.extend(units);
        let run = |p: &str, status| LintRun {
            project: p.into(),
            tool: Tool::Infer,
            java_version: crate::lintrun::JavaVersion::V8,
            pom_path: "pom.xml".into(),
            status,
            duration_seconds: 1.0,
            attempts: vec![],
            unknown_types: 0,
            dropped_findings: 0,
        };
        let runs = [run("a", RunStatus::Ok), run("b", RunStatus::Ok), run("b", RunStatus::Timeout)];
        let csn = HashMap::from([("a".to_string(), true)]);
        let grouped = ProjectInput::group(more, vec![], &runs, &csn);
        assert_eq!(grouped.len(), 2);
        assert!(grouped[0].analyses_ok && grouped[0].in_csn);
        assert!(!grouped[1].analyses_ok && !grouped[1].in_csn);
        let grouped = ProjectInput::group(grouped[0].units.clone(), vec![], &[], &csn);
        assert!(!grouped[0].analyses_ok);
    }
}
