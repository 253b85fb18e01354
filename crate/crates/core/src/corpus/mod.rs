//! Candidate project list: a filtered seed list plus a date-windowed sweep
//! of a repository search API.

mod fixture;
mod github;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use chrono::{Days, NaiveDate};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fixture::{FixtureProbe, FixtureSearch};
pub use github::GitHub;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("repository {0} is unreachable")]
    Unreachable(String),
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("http: {0}")]
    Http(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    SeedList,
    ApiSearch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectRecord {
    /// `owner/repo`
    pub full_name: String,
    pub clone_url: String,
    pub source: Source,
    pub in_csn: bool,
    pub has_root_pom: bool,
    pub last_commit_date: NaiveDate,
}

/// What a repository host reports for one repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoInfo {
    pub full_name: String,
    pub public: bool,
    pub has_root_pom: bool,
    pub clone_url: String,
    pub last_commit_date: NaiveDate,
}

pub trait RepoProbe {
    fn probe(&self, full_name: &str) -> Result<RepoInfo, CorpusError>;
}

/// Keeps public repositories with a `pom.xml` at their root, refreshing
/// each record from the probe. Unreachable repositories are logged and
/// skipped.
pub fn filter_root_pom(records: Vec<ProjectRecord>, probe: &dyn RepoProbe) -> Vec<ProjectRecord> {
    records
        .into_iter()
        .filter_map(|mut r| match probe.probe(&r.full_name) {
            Ok(info) if info.public && info.has_root_pom => {
                r.has_root_pom = true;
                r.clone_url = info.clone_url;
                r.last_commit_date = info.last_commit_date;
                Some(r)
            }
            Ok(_) => {
                info!("{}: no root pom or not public", r.full_name);
                None
            }
            Err(e) => {
                warn!("{}: skipped: {e}", r.full_name);
                None
            }
        })
        .collect()
}

pub fn filter_seed_projects(seed: Vec<ProjectRecord>, probe: &dyn RepoProbe) -> Vec<ProjectRecord> {
    let seed = seed
        .into_iter()
        .map(|r| ProjectRecord {
            source: Source::SeedList,
            in_csn: true,
            ..r
        })
        .collect();
    filter_root_pom(seed, probe)
}

/// Repositories last pushed within `from..=to`. Without `from` the range is
/// open towards the past.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchQuery {
    pub from: Option<NaiveDate>,
    pub to: NaiveDate,
    /// 1-based.
    pub page: u32,
    pub per_page: u32,
}

impl SearchQuery {
    /// Search string: language and topic filters plus the pushed-date range.
    pub fn query_string(&self) -> String {
        let range = match self.from {
            Some(from) => format!("{from}..{}", self.to),
            None => format!("<={}", self.to),
        };
        format!("language:java topic:maven pushed:{range}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SearchPage {
    /// Matches for the query, which may exceed what can be paged through.
    pub total_count: usize,
    pub items: Vec<ProjectRecord>,
}

pub trait SearchClient {
    fn search(&self, query: &SearchQuery) -> Result<SearchPage, CorpusError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub window_days: u64,
    /// Earliest last-commit date swept unless `until_exhausted`.
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Keep sliding windows into the past until no older results remain.
    pub until_exhausted: bool,
    pub per_page: u32,
    /// Results a single query can page through.
    pub result_cap: usize,
    pub max_retries: u32,
    pub base_backoff: Duration,
    pub max_backoff: Duration,
}

impl SweepConfig {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        SweepConfig {
            window_days: 30,
            start,
            end,
            until_exhausted: false,
            per_page: 100,
            result_cap: 1000,
            max_retries: 6,
            base_backoff: Duration::from_secs(2),
            max_backoff: Duration::from_secs(300),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    /// Unique by `full_name`, sorted, seeds removed.
    pub projects: Vec<ProjectRecord>,
    pub queries: usize,
    pub removed_as_seed: usize,
    pub warnings: Vec<String>,
}

/// Calls the client, backing off exponentially on rate limits.
fn search_with_backoff(
    client: &dyn SearchClient,
    q: &SearchQuery,
    cfg: &SweepConfig,
    queries: &mut usize,
) -> Result<SearchPage, CorpusError> {
    let mut attempt = 0;
    loop {
        *queries += 1;
        match client.search(q) {
            Err(CorpusError::RateLimited { retry_after }) if attempt < cfg.max_retries => {
                let backoff = cfg.base_backoff.saturating_mul(1 << attempt).min(cfg.max_backoff);
                let wait = retry_after.unwrap_or(backoff).min(cfg.max_backoff);
                warn!("rate limited on {}; retrying in {wait:?}", q.query_string());
                std::thread::sleep(wait);
                attempt += 1;
            }
            other => return other,
        }
    }
}

fn window_len(from: NaiveDate, to: NaiveDate) -> u64 {
    (to - from).num_days() as u64 + 1
}

/// Sweeps `[start, end]` in windows of `window_days`, newest first. A window
/// whose match count exceeds the result cap is split in half until it fits
/// or is one day long.
pub fn sweep_api_search(client: &dyn SearchClient, cfg: &SweepConfig, seeds: &[ProjectRecord]) -> SweepResult {
    let mut result = SweepResult::default();
    let mut found: BTreeMap<String, ProjectRecord> = BTreeMap::new();
    let step = cfg.window_days.max(1);
    // a stack popped newest first
    let mut pending: Vec<(NaiveDate, NaiveDate)> = Vec::new();
    let mut cursor = cfg.end;
    while cursor >= cfg.start {
        let from = cursor.checked_sub_days(Days::new(step - 1)).unwrap_or(NaiveDate::MIN).max(cfg.start);
        pending.push((from, cursor));
        match from.pred_opt() {
            Some(p) => cursor = p,
            None => break,
        }
    }
    pending.reverse();
    let mut oldest = cfg.start;

    loop {
        while let Some((from, to)) = pending.pop() {
            sweep_window(client, cfg, from, to, &mut pending, &mut found, &mut result);
        }
        if !cfg.until_exhausted {
            break;
        }
        let Some(before) = oldest.pred_opt() else { break };
        let probe = SearchQuery {
            from: None,
            to: before,
            page: 1,
            per_page: 1,
        };
        match search_with_backoff(client, &probe, cfg, &mut result.queries) {
            Ok(page) if page.total_count > 0 => {
                let from = before.checked_sub_days(Days::new(step - 1)).unwrap_or(NaiveDate::MIN);
                pending.push((from, before));
                oldest = from;
            }
            Ok(_) => break,
            Err(e) => {
                result.warnings.push(format!("stopped before {before}: {e}"));
                break;
            }
        }
    }

    let seed_names: BTreeSet<&str> = seeds.iter().map(|s| s.full_name.as_str()).collect();
    let before = found.len();
    result.projects = found
        .into_values()
        .filter(|p| !seed_names.contains(p.full_name.as_str()))
        .collect();
    result.removed_as_seed = before - result.projects.len();
    for w in &result.warnings {
        warn!("{w}");
    }
    result
}

fn sweep_window(
    client: &dyn SearchClient,
    cfg: &SweepConfig,
    from: NaiveDate,
    to: NaiveDate,
    pending: &mut Vec<(NaiveDate, NaiveDate)>,
    found: &mut BTreeMap<String, ProjectRecord>,
    result: &mut SweepResult,
) {
    let mut page = 1;
    let mut seen = 0usize;
    loop {
        let q = SearchQuery {
            from: Some(from),
            to,
            page,
            per_page: cfg.per_page,
        };
        let resp = match search_with_backoff(client, &q, cfg, &mut result.queries) {
            Ok(r) => r,
            Err(e) => {
                result.warnings.push(format!("window {from}..{to} page {page}: {e}"));
                return;
            }
        };
        if page == 1 && resp.total_count > cfg.result_cap {
            let days = window_len(from, to);
            if days > 1 {
                let mid = from + Days::new(days / 2 - 1);
                info!("window {from}..{to} saturated ({} results); halving", resp.total_count);
                pending.push((from, mid));
                pending.push((mid.succ_opt().unwrap_or(mid), to));
                return;
            }
            result.warnings.push(format!(
                "window {from}..{to}: {} results exceed the cap of {}; some are unreachable",
                resp.total_count, cfg.result_cap
            ));
        }
        let n = resp.items.len();
        seen += n;
        for mut r in resp.items {
            r.source = Source::ApiSearch;
            r.in_csn = false;
            found.entry(r.full_name.clone()).or_insert(r);
        }
        if n == 0 || n < cfg.per_page as usize || seen >= resp.total_count.min(cfg.result_cap) {
            return;
        }
        page += 1;
    }
}
