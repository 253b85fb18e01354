use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{CorpusError, ProjectRecord, RepoInfo, RepoProbe, SearchClient, SearchPage, SearchQuery};

/// Offline search API over recorded repositories. Pages stop at the result
/// cap just like the live API.
#[derive(Debug)]
pub struct FixtureSearch {
    pub repos: Vec<ProjectRecord>,
    pub result_cap: usize,
    /// Answer every n-th call with a rate-limit response.
    pub rate_limit_every: Option<usize>,
    pub calls: AtomicUsize,
}

impl FixtureSearch {
    pub fn new(mut repos: Vec<ProjectRecord>) -> Self {
        repos.sort_by(|a, b| a.full_name.cmp(&b.full_name));
        FixtureSearch {
            repos,
            result_cap: 1000,
            rate_limit_every: None,
            calls: AtomicUsize::new(0),
        }
    }

    /// Reads `search.jsonl` from a fixture directory.
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let repos = crate::jsonl::read(&dir.join("search.jsonl")).map_err(|e| CorpusError::Io(e.to_string()))?;
        Ok(Self::new(repos))
    }
}

impl SearchClient for FixtureSearch {
    fn search(&self, q: &SearchQuery) -> Result<SearchPage, CorpusError> {
        let call = self.calls.fetch_add(1, Ordering::Relaxed) + 1;
        if self.rate_limit_every.is_some_and(|n| call.is_multiple_of(n)) {
            return Err(CorpusError::RateLimited { retry_after: None });
        }
        let matches: Vec<&ProjectRecord> = self
            .repos
            .iter()
            .filter(|r| r.last_commit_date <= q.to && q.from.is_none_or(|f| r.last_commit_date >= f))
            .collect();
        let per_page = q.per_page.max(1) as usize;
        let start = (q.page.max(1) as usize - 1) * per_page;
        let end = (start + per_page).min(self.result_cap).min(matches.len());
        Ok(SearchPage {
            total_count: matches.len(),
            items: matches.get(start..end).unwrap_or_default().iter().map(|&r| r.clone()).collect(),
        })
    }
}

/// Offline repository metadata; names not listed are unreachable.
#[derive(Debug, Clone, Default)]
pub struct FixtureProbe {
    pub repos: BTreeMap<String, RepoInfo>,
}

impl FixtureProbe {
    pub fn new(infos: impl IntoIterator<Item = RepoInfo>) -> Self {
        FixtureProbe {
            repos: infos.into_iter().map(|i| (i.full_name.clone(), i)).collect(),
        }
    }

    /// Reads `repos.jsonl` from a fixture directory.
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let infos: Vec<RepoInfo> = crate::jsonl::read(&dir.join("repos.jsonl")).map_err(|e| CorpusError::Io(e.to_string()))?;
        Ok(Self::new(infos))
    }
}

impl RepoProbe for FixtureProbe {
    fn probe(&self, full_name: &str) -> Result<RepoInfo, CorpusError> {
        self.repos
            .get(full_name)
            .cloned()
            .ok_or_else(|| CorpusError::Unreachable(full_name.to_string()))
    }
}
