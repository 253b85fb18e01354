mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use methodlint_core::dataset::{Split, SplitMode, Threshold};
use methodlint_core::InputFormat;
use serde::Serialize;

/// Method-level learned linting: corpus collection, analyzer runs, dataset
/// construction, training, prediction and evaluation.
#[derive(Debug, Parser, Serialize)]
#[command(name = "methodlint", version, arg_required_else_help = true)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Also write the effective configuration to this file.
    #[arg(long, global = true)]
    run_manifest: Option<PathBuf>,
    /// Log level: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Filter a seed list and sweep the search API for Maven projects.
    Corpus(CorpusArgs),
    /// Run Infer and/or SpotBugs over checked-out projects.
    Lintrun(LintrunArgs),
    /// Extract method units from Java sources.
    Extract(ExtractArgs),
    /// Apply an input format to method units.
    Transform(TransformArgs),
    /// Map findings to methods and build a labeled, split dataset.
    BuildDataset(BuildDatasetArgs),
    /// Train a binary or multi-label classifier.
    Train(TrainArgs),
    /// Score method units with a trained classifier.
    Predict(PredictArgs),
    /// Binary model first, multi-label model on flagged methods.
    Pipeline(PipelineArgs),
    /// Metrics for predictions against a dataset.
    Eval(EvalArgs),
    /// Time extraction and both models per project.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Serialize)]
struct CorpusArgs {
    /// Seed list, one owner/repo per line.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Offline mode: read search.jsonl and repos.jsonl from this directory.
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// File holding an API token for live mode.
    #[arg(long)]
    token_file: Option<PathBuf>,
    #[arg(long, default_value = "2008-01-01")]
    start: NaiveDate,
    /// Defaults to today.
    #[arg(long)]
    end: Option<NaiveDate>,
    #[arg(long, default_value_t = 30)]
    window_days: u64,
    /// Keep sweeping older windows until the API has no older results.
    #[arg(long)]
    until_exhausted: bool,
    /// Skip the API sweep and only filter the seed list.
    #[arg(long)]
    no_search: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ToolChoice {
    Infer,
    Spotbugs,
    All,
}

#[derive(Debug, Args, Serialize)]
struct LintrunArgs {
    /// Directory with one checked-out project per subdirectory.
    #[arg(long)]
    projects_dir: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    tool: ToolChoice,
    /// Only these projects (subdirectory names).
    #[arg(long = "project")]
    projects: Vec<String>,
    #[arg(long, default_value_t = methodlint_core::lintrun::DEFAULT_TIMEOUT_SECS)]
    timeout_secs: u64,
    /// Bug-type mapping overriding the shipped Infer table.
    #[arg(long)]
    infer_mapping: Option<PathBuf>,
    /// Bug-type mapping overriding the shipped SpotBugs table.
    #[arg(long)]
    spotbugs_mapping: Option<PathBuf>,
    /// LintRun records (JSONL).
    #[arg(long)]
    runs: PathBuf,
    /// IssueRecord records (JSONL).
    #[arg(long)]
    issues: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ExtractArgs {
    /// One project's source tree.
    #[arg(long, conflicts_with = "projects_dir", required_unless_present = "projects_dir")]
    src: Option<PathBuf>,
    /// Project name for --src (default: the directory name).
    #[arg(long, requires = "src")]
    project: Option<String>,
    /// Directory with one project per subdirectory.
    #[arg(long)]
    projects_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct FormatArgs {
    /// String-literal placeholder for RS.
    #[arg(long, default_value = methodlint_core::transform::DEFAULT_PLACEHOLDER)]
    placeholder: String,
    #[arg(long, default_value_t = methodlint_core::transform::DEFAULT_MAX_TOKENS)]
    max_tokens: usize,
}

#[derive(Debug, Args, Serialize)]
struct TransformArgs {
    #[arg(long)]
    units: PathBuf,
    /// Unmodified, RC, RJ, RS or any `+` combination.
    #[arg(long)]
    format: InputFormat,
    #[command(flatten)]
    opts: FormatArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct BuildDatasetArgs {
    #[arg(long)]
    units: PathBuf,
    #[arg(long)]
    issues: PathBuf,
    #[arg(long)]
    runs: PathBuf,
    /// Candidate list from `corpus`; marks which projects came from the seed list.
    #[arg(long)]
    candidates: Option<PathBuf>,
    /// Equivalence groups replacing the shipped table.
    #[arg(long)]
    equivalence: Option<PathBuf>,
    /// coverage:<fraction> or mincount:<n>.
    #[arg(long, default_value = "coverage:0.75")]
    threshold: Threshold,
    #[arg(long, default_value_t = 0)]
    balance_seed: u64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value = "default")]
    split: SplitMode,
    #[arg(long, default_value_t = methodlint_core::dataset::DEFAULT_HELDOUT_FRACTION)]
    heldout_fraction: f64,
    /// LabeledSample records (JSONL).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TaskChoice {
    Binary,
    MultiLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum BackendChoice {
    Baseline,
    External,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    units: PathBuf,
    /// Manifest from build-dataset; its vocabulary fixes the multi-label ids.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    task: TaskChoice,
    /// Defaults to RJ for binary and RC+RJ for multi-label.
    #[arg(long)]
    format: Option<InputFormat>,
    #[command(flatten)]
    opts: FormatArgs,
    #[arg(long, value_enum, default_value = "baseline")]
    backend: BackendChoice,
    /// Backend program for --backend external.
    #[arg(long)]
    program: Option<PathBuf>,
    /// Extra arguments passed to the backend program.
    #[arg(long = "program-arg", allow_hyphen_values = true)]
    program_args: Vec<String>,
    /// Baseline hyperparameter as key=value (epochs, l2, dims_log2, threshold, tol, bigrams).
    #[arg(long = "hyperparam")]
    hyperparams: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model directory.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct Selection {
    #[arg(long)]
    units: PathBuf,
    /// Restrict to samples of this dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Split to take from --dataset.
    #[arg(long, requires = "dataset")]
    split: Option<Split>,
}

#[derive(Debug, Args, Serialize)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    select: Selection,
    #[command(flatten)]
    opts: FormatArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct PipelineArgs {
    #[arg(long)]
    binary_model: PathBuf,
    #[arg(long)]
    multi_model: PathBuf,
    #[command(flatten)]
    select: Selection,
    #[command(flatten)]
    opts: FormatArgs,
    /// Final labels per method.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    binary_out: Option<PathBuf>,
    #[arg(long)]
    multi_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    preds: PathBuf,
    /// Ground truth (LabeledSample JSONL).
    #[arg(long)]
    dataset: PathBuf,
    /// Evaluate against this split only.
    #[arg(long, default_value = "TEST")]
    split: Split,
    /// Evaluate against every sample in --dataset.
    #[arg(long, conflicts_with = "split")]
    all_splits: bool,
    #[arg(long, value_enum)]
    task: TaskChoice,
    /// Manifest whose vocabulary fixes the multi-label types.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Leave NOISSUE out of the weighted averages.
    #[arg(long)]
    exclude_noissue: bool,
    /// Also report head and tail labels separately.
    #[arg(long)]
    head_tail: bool,
    #[arg(long, default_value_t = 0.5)]
    head_coverage: f64,
    /// Labels always placed in the head.
    #[arg(long = "force-head", default_values = ["S8"])]
    force_head: Vec<String>,
    #[arg(long)]
    no_forced_head: bool,
    #[arg(long)]
    out: PathBuf,
    /// Row name in --summary-csv.
    #[arg(long, default_value = "model")]
    name: String,
    #[arg(long)]
    summary_csv: Option<PathBuf>,
    #[arg(long)]
    per_type_csv: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct BenchArgs {
    #[arg(long)]
    projects_dir: PathBuf,
    #[arg(long = "project")]
    projects: Vec<String>,
    #[arg(long)]
    binary_model: PathBuf,
    #[arg(long)]
    multi_model: PathBuf,
    #[command(flatten)]
    opts: FormatArgs,
    /// LintRun records whose durations are compared against.
    #[arg(long)]
    runs: Option<PathBuf>,
    /// Linter mean as tool=seconds, instead of or in addition to --runs.
    #[arg(long = "linter-mean")]
    linter_means: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    boxplot_csv: Option<PathBuf>,
}

/// A problem with how the command was invoked rather than with its data.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp_millis()
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let config = serde_json::to_string(cli)?;
    eprintln!("run config: {config}");
    if let Some(path) = &cli.run_manifest {
        std::fs::write(path, serde_json::to_string_pretty(cli)? + "\n")?;
    }
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    match &cli.command {
        Command::Corpus(a) => commands::corpus(a),
        Command::Lintrun(a) => commands::lintrun(a),
        Command::Extract(a) => commands::extract(a),
        Command::Transform(a) => commands::transform(a),
        Command::BuildDataset(a) => commands::build_dataset(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Pipeline(a) => commands::pipeline(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
    }
}
