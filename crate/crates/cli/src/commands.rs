use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use log::{info, warn};
use methodlint_core::corpus::{
    filter_root_pom, filter_seed_projects, sweep_api_search, FixtureProbe, FixtureSearch, GitHub, ProjectRecord,
    RepoProbe, SearchClient, Source, SweepConfig,
};
use methodlint_core::dataset::{
    build_dataset as build, label_frequencies, BuildConfig, LabelVocabulary, LabeledSample, ProjectInput, Split,
};
use methodlint_core::eval::{
    binary_metrics, head_tail_metrics, head_tail_partition, multilabel_metrics, timing_bench, write_per_type_csv,
    write_summary_csv, HeadTailConfig, LinterComparison, MetricReport, MultiLabelOptions, Stage, Truth,
};
use methodlint_core::extract::{extract_tree, MethodUnit};
use methodlint_core::lintrun::{run_analysis, IssueRecord, LintRun, MavenExecutor, Tool, Toolchain, TypeMapping};
use methodlint_core::model::{
    run_pipeline, Backend, BaselineModel, Classifier, ClassifierSpec, ExternalBackend, PredictionRecord, Task,
    DEFAULT_THRESHOLD,
};
use methodlint_core::transform::{apply_format, FormattedSample, TransformOptions};
use methodlint_core::{jsonl, InputFormat};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{
    BackendChoice, BenchArgs, BuildDatasetArgs, CorpusArgs, EvalArgs, ExtractArgs, FormatArgs, LintrunArgs,
    PipelineArgs, PredictArgs, Selection, TaskChoice, ToolChoice, TrainArgs, TransformArgs, UsageError,
};

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    Ok(jsonl::read(path)?)
}

fn write<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    jsonl::write(path, items).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let file = File::create(path).with_context(|| format!("writing {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl FormatArgs {
    fn options(&self) -> TransformOptions {
        TransformOptions {
            placeholder: self.placeholder.clone(),
            max_tokens: self.max_tokens,
        }
    }
}

impl From<TaskChoice> for Task {
    fn from(t: TaskChoice) -> Self {
        match t {
            TaskChoice::Binary => Task::Binary,
            TaskChoice::MultiLabel => Task::MultiLabel,
        }
    }
}

/// Subdirectories of `dir`, sorted, optionally restricted to `only`.
fn project_dirs(dir: &Path, only: &[String]) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if only.is_empty() || only.contains(&name) {
                out.push((name, entry.path()));
            }
        }
    }
    out.sort();
    for want in only {
        if !out.iter().any(|(n, _)| n == want) {
            bail!("project {want} not found in {}", dir.display());
        }
    }
    Ok(out)
}

fn today() -> NaiveDate {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    chrono::DateTime::from_timestamp(secs, 0).map(|d| d.date_naive()).unwrap_or_default()
}

pub fn corpus(a: &CorpusArgs) -> Result<()> {
    let seeds: Vec<ProjectRecord> = match &a.seeds {
        None => Vec::new(),
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|name| ProjectRecord {
                full_name: name.to_string(),
                clone_url: format!("https://github.com/{name}.git"),
                source: Source::SeedList,
                in_csn: true,
                has_root_pom: false,
                last_commit_date: NaiveDate::default(),
            })
            .collect(),
    };
    let (probe, search): (Box<dyn RepoProbe>, Box<dyn SearchClient>) = match &a.fixture {
        Some(dir) => (Box::new(FixtureProbe::load(dir)?), Box::new(FixtureSearch::load(dir)?)),
        None => {
            let token = match &a.token_file {
                Some(p) => Some(std::fs::read_to_string(p)?.trim().to_string()),
                None => None,
            };
            (Box::new(GitHub::new(token.clone())), Box::new(GitHub::new(token)))
        }
    };
    let seed_count = seeds.len();
    let mut kept = filter_seed_projects(seeds, probe.as_ref());
    info!("{} of {seed_count} seed projects kept", kept.len());
    if !a.no_search {
        let cfg = SweepConfig {
            window_days: a.window_days,
            until_exhausted: a.until_exhausted,
            ..SweepConfig::new(a.start, a.end.unwrap_or_else(today))
        };
        let swept = sweep_api_search(search.as_ref(), &cfg, &kept);
        info!(
            "sweep: {} projects in {} queries, {} already in the seed list",
            swept.projects.len(),
            swept.queries,
            swept.removed_as_seed
        );
        kept.extend(filter_root_pom(swept.projects, probe.as_ref()));
    }
    kept.sort_by(|a, b| a.full_name.cmp(&b.full_name));
    kept.dedup_by(|a, b| a.full_name == b.full_name);
    info!("{} candidate projects", kept.len());
    write(&a.out, &kept)
}

fn load_mapping(tool: Tool, path: &Option<PathBuf>) -> Result<TypeMapping> {
    Ok(match path {
        Some(p) => TypeMapping::load(p)?,
        None => TypeMapping::builtin(tool),
    })
}

pub fn lintrun(a: &LintrunArgs) -> Result<()> {
    let tools = match a.tool {
        ToolChoice::Infer => vec![Tool::Infer],
        ToolChoice::Spotbugs => vec![Tool::Spotbugs],
        ToolChoice::All => vec![Tool::Infer, Tool::Spotbugs],
    };
    let mappings: HashMap<Tool, TypeMapping> = [
        (Tool::Infer, load_mapping(Tool::Infer, &a.infer_mapping)?),
        (Tool::Spotbugs, load_mapping(Tool::Spotbugs, &a.spotbugs_mapping)?),
    ]
    .into();
    let projects = project_dirs(&a.projects_dir, &a.projects)?;
    let executor = MavenExecutor::new(Toolchain::from_env());
    let timeout = Duration::from_secs(a.timeout_secs);
    let results: Vec<(LintRun, Vec<IssueRecord>)> = projects
        .par_iter()
        .flat_map_iter(|(name, dir)| {
            tools
                .iter()
                .map(|&tool| run_analysis(name, dir, tool, timeout, &executor, &mappings[&tool]))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut runs = Vec::new();
    let mut issues = Vec::new();
    for (run, found) in results {
        info!("{} {}: {:?}, {} findings", run.project, run.tool, run.status, found.len());
        runs.push(run);
        issues.extend(found);
    }
    write(&a.runs, &runs)?;
    write(&a.issues, &issues)
}

pub fn extract(a: &ExtractArgs) -> Result<()> {
    let projects: Vec<(String, PathBuf)> = match (&a.src, &a.projects_dir) {
        (Some(src), _) => {
            let name = match &a.project {
                Some(n) => n.clone(),
                None => src
                    .canonicalize()
                    .ok()
                    .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                    .unwrap_or_else(|| "project".to_string()),
            };
            vec![(name, src.clone())]
        }
        (None, Some(dir)) => project_dirs(dir, &[])?,
        (None, None) => return Err(usage("one of --src or --projects-dir is required")),
    };
    let mut units = Vec::new();
    for (name, dir) in projects {
        if !dir.is_dir() {
            bail!("{} is not a directory", dir.display());
        }
        let tree = extract_tree(&dir, &name)?;
        for (file, reason) in &tree.skipped {
            warn!("{name}: skipped {file}: {reason}");
        }
        info!("{name}: {} methods from {} files", tree.units.len(), tree.files);
        units.extend(tree.units);
    }
    write(&a.out, &units)
}

fn format_units(units: &[&MethodUnit], fmt: InputFormat, opts: &TransformOptions) -> Vec<FormattedSample> {
    units
        .iter()
        .filter_map(|u| match apply_format(u, fmt, opts) {
            Ok(s) => Some(s),
            Err(e) => {
                warn!("{}: {e}", u.id);
                None
            }
        })
        .collect()
}

pub fn transform(a: &TransformArgs) -> Result<()> {
    let units: Vec<MethodUnit> = read(&a.units)?;
    let refs: Vec<&MethodUnit> = units.iter().collect();
    let samples = format_units(&refs, a.format, &a.opts.options());
    let truncated = samples.iter().filter(|s| s.truncated).count();
    info!("{} samples as {}, {truncated} truncated", samples.len(), a.format.code());
    write(&a.out, &samples)
}

/// Names under which a candidate project may appear as a checkout directory.
fn candidate_names(r: &ProjectRecord) -> Vec<String> {
    let mut names = vec![r.full_name.clone(), r.full_name.replace('/', "__")];
    if let Some((_, repo)) = r.full_name.split_once('/') {
        names.push(repo.to_string());
    }
    names
}

pub fn build_dataset(a: &BuildDatasetArgs) -> Result<()> {
    let units: Vec<MethodUnit> = read(&a.units)?;
    let issues: Vec<IssueRecord> = read(&a.issues)?;
    let runs: Vec<LintRun> = read(&a.runs)?;
    let mut in_csn = HashMap::new();
    if let Some(path) = &a.candidates {
        for r in read::<ProjectRecord>(path)? {
            for n in candidate_names(&r) {
                in_csn.insert(n, r.in_csn);
            }
        }
    }
    let vocab = match &a.equivalence {
        Some(p) => LabelVocabulary::with_mappings(
            &[TypeMapping::builtin(Tool::Infer), TypeMapping::builtin(Tool::Spotbugs)],
            Some(p),
        )?,
        None => LabelVocabulary::builtin(),
    };
    let projects = ProjectInput::group(units, issues, &runs, &in_csn);
    let cfg = BuildConfig {
        threshold: a.threshold,
        balance_seed: a.balance_seed,
        split_seed: a.split_seed,
        split: a.split,
        heldout_fraction: a.heldout_fraction,
    };
    let built = build(&projects, &vocab, &cfg)?;
    info!("{} samples; {:?}", built.manifest.total, built.manifest.split_counts);
    info!("stats: {}", serde_json::to_string(&built.stats)?);
    write(&a.out, &built.samples)?;
    write_json(&a.manifest, &built.manifest)
}

/// Saved next to a trained model; enough to reload it for prediction.
#[derive(Debug, Serialize, Deserialize)]
struct ModelMeta {
    backend: Backend,
    spec: ClassifierSpec,
    format: InputFormat,
    threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    program: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    program_args: Vec<String>,
}

const META_FILE: &str = "methodlint-model.json";
const BASELINE_FILE: &str = "baseline.json";

struct Loaded {
    classifier: Box<dyn Classifier>,
    format: InputFormat,
}

fn load_model(dir: &Path) -> Result<Loaded> {
    let meta: ModelMeta = read_json(&dir.join(META_FILE))?;
    let classifier: Box<dyn Classifier> = match meta.backend {
        Backend::Baseline => Box::new(BaselineModel::load(&dir.join(BASELINE_FILE))?),
        Backend::External => {
            let program = meta
                .program
                .ok_or_else(|| anyhow::anyhow!("{}: external model without a program", dir.display()))?;
            let mut backend = ExternalBackend::new(program, dir, dir.join("work"), meta.spec);
            backend.args = meta.program_args;
            backend.threshold = meta.threshold;
            Box::new(backend)
        }
    };
    Ok(Loaded {
        classifier,
        format: meta.format,
    })
}

fn parse_hyperparam(kv: &str) -> Result<(String, serde_json::Value)> {
    let (k, v) = kv
        .split_once('=')
        .ok_or_else(|| usage(format!("hyperparameter {kv:?} is not key=value")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

fn index_units(units: &[MethodUnit]) -> HashMap<&str, &MethodUnit> {
    units.iter().map(|u| (u.id.as_str(), u)).collect()
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let task: Task = a.task.into();
    let samples: Vec<LabeledSample> = read(&a.dataset)?;
    let units: Vec<MethodUnit> = read(&a.units)?;
    let by_id = index_units(&units);
    let mut spec = match task {
        Task::Binary => ClassifierSpec::binary(),
        Task::MultiLabel => {
            let ids: BTreeSet<String> = match &a.manifest {
                Some(p) => read_json::<methodlint_core::dataset::DatasetManifest>(p)?.vocabulary.effective_ids,
                None => samples.iter().flat_map(|s| s.labels.iter().cloned()).collect(),
            };
            ClassifierSpec::multi_label(ids)?
        }
    };
    spec.hyperparams = a.hyperparams.iter().map(|kv| parse_hyperparam(kv)).collect::<Result<_>>()?;
    spec.backend = match a.backend {
        BackendChoice::Baseline => Backend::Baseline,
        BackendChoice::External => Backend::External,
    };
    let format = a.format.unwrap_or(match task {
        Task::Binary => InputFormat::RJ,
        Task::MultiLabel => InputFormat::RC_RJ,
    });
    let opts = a.opts.options();
    let pick = |split: Split| -> Result<Vec<(FormattedSample, BTreeSet<String>)>> {
        let mut out = Vec::new();
        for s in samples.iter().filter(|s| s.split == split) {
            let unit = by_id
                .get(s.id.as_str())
                .ok_or_else(|| anyhow::anyhow!("sample {} has no method unit in {}", s.id, a.units.display()))?;
            out.push((apply_format(unit, format, &opts)?, s.labels.clone()));
        }
        Ok(out)
    };
    let train_set = pick(Split::Train)?;
    let val_set = pick(Split::Val)?;
    info!("training {task:?} on {} samples ({} validation) as {}", train_set.len(), val_set.len(), format.code());
    std::fs::create_dir_all(&a.model)?;
    let mut meta = ModelMeta {
        backend: spec.backend,
        spec: spec.clone(),
        format,
        threshold: DEFAULT_THRESHOLD,
        program: None,
        program_args: Vec::new(),
    };
    match a.backend {
        BackendChoice::Baseline => {
            let (mut model, report) = BaselineModel::train(spec, &train_set, &val_set, a.seed)?;
            model.format = Some(format);
            meta.threshold = model.hyperparams.threshold;
            if let Some(last) = report.epochs.last() {
                info!("{} epochs, final train loss {:.6}", report.epochs.len(), last.train_loss);
            }
            model.save(&a.model.join(BASELINE_FILE))?;
            write_json(&a.model.join("training-report.json"), &report)?;
        }
        BackendChoice::External => {
            let program = a
                .program
                .clone()
                .ok_or_else(|| usage("--backend external needs --program"))?;
            let mut backend = ExternalBackend::new(&program, &a.model, a.model.join("work"), spec);
            backend.args = a.program_args.clone();
            backend.train(&train_set, &val_set)?;
            meta.program = Some(program);
            meta.program_args = a.program_args.clone();
        }
    }
    write_json(&a.model.join(META_FILE), &meta)
}

/// Units to score: all of them, or those of one dataset split.
fn selected_units(s: &Selection) -> Result<Vec<MethodUnit>> {
    let units: Vec<MethodUnit> = read(&s.units)?;
    let Some(path) = &s.dataset else { return Ok(units) };
    let samples: Vec<LabeledSample> = read(path)?;
    let wanted: BTreeSet<&str> = samples
        .iter()
        .filter(|x| s.split.is_none_or(|sp| x.split == sp))
        .map(|x| x.id.as_str())
        .collect();
    let picked: Vec<MethodUnit> = units.iter().filter(|u| wanted.contains(u.id.as_str())).cloned().collect();
    if picked.len() != wanted.len() {
        bail!("{} of {} dataset samples have no method unit", wanted.len() - picked.len(), wanted.len());
    }
    Ok(picked)
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let units = selected_units(&a.select)?;
    let refs: Vec<&MethodUnit> = units.iter().collect();
    let samples = format_units(&refs, model.format, &a.opts.options());
    let preds = model.classifier.predict(&samples)?;
    info!("{} predictions, {} with issues", preds.len(), preds.iter().filter(|p| p.is_positive()).count());
    write(&a.out, &preds)
}

pub fn pipeline(a: &PipelineArgs) -> Result<()> {
    let binary = load_model(&a.binary_model)?;
    let multi = load_model(&a.multi_model)?;
    let units = selected_units(&a.select)?;
    let out = run_pipeline(binary.classifier.as_ref(), multi.classifier.as_ref(), &units, &a.opts.options())?;
    info!("{} methods, {} flagged", out.binary_preds.len(), out.multi_preds.len());
    if let Some(p) = &a.binary_out {
        write(p, &out.binary_preds)?;
    }
    if let Some(p) = &a.multi_out {
        write(p, &out.multi_preds)?;
    }
    write(&a.out, out.combined())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let preds: Vec<PredictionRecord> = read(&a.preds)?;
    let samples: Vec<LabeledSample> = read(&a.dataset)?;
    let truth: Vec<Truth> = samples
        .iter()
        .filter(|s| a.all_splits || s.split == a.split)
        .map(Truth::from)
        .collect();
    let mut report = MetricReport {
        binary: None,
        multi_label: None,
        head_tail: None,
    };
    let opts = MultiLabelOptions {
        include_noissue: !a.exclude_noissue,
    };
    match a.task {
        TaskChoice::Binary => {
            let r = binary_metrics(&preds, &truth)?;
            info!("accuracy {:.3} precision {:.3} recall {:.3} f1 {:.3}", r.accuracy, r.scores.precision, r.scores.recall, r.scores.f1);
            if let Some(p) = &a.summary_csv {
                write_summary_csv(File::create(p)?, [(a.name.as_str(), r.accuracy, r.scores)])?;
            }
            report.binary = Some(r);
        }
        TaskChoice::MultiLabel => {
            let mut universe: BTreeSet<String> = match &a.manifest {
                Some(p) => read_json::<methodlint_core::dataset::DatasetManifest>(p)?.vocabulary.effective_ids,
                None => BTreeSet::new(),
            };
            if !universe.is_empty() {
                universe.insert(methodlint_core::dataset::NO_ISSUE.to_string());
            }
            let r = multilabel_metrics(&preds, &truth, &universe, opts)?;
            info!(
                "exact match {:.3} weighted precision {:.3} recall {:.3} f1 {:.3}",
                r.exact_match_accuracy, r.weighted.precision, r.weighted.recall, r.weighted.f1
            );
            if let Some(p) = &a.summary_csv {
                write_summary_csv(File::create(p)?, [(a.name.as_str(), r.exact_match_accuracy, r.weighted)])?;
            }
            if let Some(p) = &a.per_type_csv {
                write_per_type_csv(File::create(p)?, &r)?;
            }
            if a.head_tail {
                let freqs: BTreeMap<String, usize> = label_frequencies_with_noissue(&truth);
                let cfg = HeadTailConfig {
                    coverage_fraction: a.head_coverage,
                    forced_head_labels: if a.no_forced_head { BTreeSet::new() } else { a.force_head.iter().cloned().collect() },
                };
                let partition = head_tail_partition(&freqs, &cfg);
                let ht = head_tail_metrics(&preds, &truth, &partition, opts)?;
                info!(
                    "head {:?}: f1 {:.3}; tail ({} labels): f1 {:.3}, tail-only accuracy {}",
                    ht.partition.head,
                    ht.head.weighted.f1,
                    ht.partition.tail.len(),
                    ht.tail.weighted.f1,
                    ht.tail_only_accuracy.map_or("absent".to_string(), |x| format!("{x:.3}"))
                );
                report.head_tail = Some(ht);
            }
            report.multi_label = Some(r);
        }
    }
    write_json(&a.out, &report)
}

/// Label counts over the evaluated samples, an empty set counting as NOISSUE.
fn label_frequencies_with_noissue(truth: &[Truth]) -> BTreeMap<String, usize> {
    let as_samples: Vec<LabeledSample> = truth
        .iter()
        .map(|t| LabeledSample {
            id: t.sample_id.clone(),
            labels: t.label_set(),
            ..Default::default()
        })
        .collect();
    label_frequencies(&as_samples)
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let binary = load_model(&a.binary_model)?;
    let multi = load_model(&a.multi_model)?;
    let opts = a.opts.options();
    let projects = project_dirs(&a.projects_dir, &a.projects)?;
    let dirs: HashMap<String, PathBuf> = projects.iter().cloned().collect();
    let names: Vec<String> = projects.into_iter().map(|(n, _)| n).collect();
    let mut units: HashMap<String, Vec<MethodUnit>> = HashMap::new();
    let mut flagged: HashMap<String, Vec<bool>> = HashMap::new();
    let mut runner = |project: &str, stage: Stage| -> std::result::Result<(), String> {
        match stage {
            Stage::Extraction => {
                let tree = extract_tree(&dirs[project], project).map_err(|e| e.to_string())?;
                units.insert(project.to_string(), tree.units);
            }
            Stage::BinaryAnalysis => {
                let us: Vec<&MethodUnit> = units[project].iter().collect();
                let samples = format_units(&us, binary.format, &opts);
                let preds = binary.classifier.predict(&samples).map_err(|e| e.to_string())?;
                let positive: HashMap<&str, bool> = preds.iter().map(|p| (p.sample_id.as_str(), p.is_positive())).collect();
                let marks = us.iter().map(|u| positive.get(u.id.as_str()).copied().unwrap_or(false)).collect();
                flagged.insert(project.to_string(), marks);
            }
            Stage::MultilabelAnalysis => {
                let us: Vec<&MethodUnit> = units[project]
                    .iter()
                    .zip(&flagged[project])
                    .filter(|(_, &f)| f)
                    .map(|(u, _)| u)
                    .collect();
                if !us.is_empty() {
                    multi
                        .classifier
                        .predict(&format_units(&us, multi.format, &opts))
                        .map_err(|e| e.to_string())?;
                }
            }
        }
        Ok(())
    };
    let mut report = timing_bench(&names, &mut runner);
    if let Some(p) = &a.runs {
        report.linters = LinterComparison::import(&read::<LintRun>(p)?);
    }
    for lm in &a.linter_means {
        let (tool, secs) = lm
            .split_once('=')
            .ok_or_else(|| usage(format!("--linter-mean {lm:?} is not tool=seconds")))?;
        let secs: f64 = secs.parse().map_err(|_| usage(format!("--linter-mean {lm:?}: bad seconds")))?;
        report.linters.retain(|l| l.tool != tool);
        report.linters.push(LinterComparison::from_mean(tool, secs));
    }
    print!("{}", report.render());
    if let Some(p) = &a.boxplot_csv {
        report.write_boxplot_csv(File::create(p)?)?;
    }
    write_json(&a.out, &report)
}
