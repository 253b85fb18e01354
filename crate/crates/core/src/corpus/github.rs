use std::time::{Duration, SystemTime, UNIX_EPOCH};

use chrono::NaiveDate;
use serde::Deserialize;
use ureq::Agent;

use super::{CorpusError, ProjectRecord, RepoInfo, RepoProbe, SearchClient, SearchPage, SearchQuery, Source};

/// Live client for the GitHub REST API.
pub struct GitHub {
    agent: Agent,
    base: String,
    token: Option<String>,
}

#[derive(Deserialize)]
struct Repo {
    full_name: String,
    clone_url: String,
    #[serde(default)]
    private: bool,
    pushed_at: Option<String>,
}

#[derive(Deserialize)]
struct Search {
    total_count: usize,
    items: Vec<Repo>,
}

fn pushed_date(pushed_at: Option<&str>) -> NaiveDate {
    pushed_at
        .and_then(|s| s.get(..10))
        .and_then(|d| d.parse().ok())
        .unwrap_or_default()
}

impl GitHub {
    pub fn new(token: Option<String>) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        GitHub {
            agent,
            base: "https://api.github.com".into(),
            token: token.filter(|t| !t.is_empty()),
        }
    }

    fn get(&self, path: &str, query: &[(&str, String)]) -> Result<Option<ureq::Body>, CorpusError> {
        let mut req = self
            .agent
            .get(format!("{}{path}", self.base))
            .header("Accept", "application/vnd.github+json")
            .header("User-Agent", "methodlint");
        if let Some(t) = &self.token {
            req = req.header("Authorization", format!("Bearer {t}"));
        }
        for (k, v) in query {
            req = req.query(*k, v);
        }
        let resp = req.call().map_err(|e| CorpusError::Http(e.to_string()))?;
        let header = |name: &str| resp.headers().get(name).and_then(|v| v.to_str().ok()).map(str::to_owned);
        match resp.status().as_u16() {
            200..=299 => Ok(Some(resp.into_body())),
            404 => Ok(None),
            403 | 429 if header("retry-after").is_some() || header("x-ratelimit-remaining").as_deref() == Some("0") => {
                let retry_after = header("retry-after")
                    .and_then(|s| s.parse().ok())
                    .map(Duration::from_secs)
                    .or_else(|| {
                        let reset: u64 = header("x-ratelimit-reset")?.parse().ok()?;
                        let now = SystemTime::now().duration_since(UNIX_EPOCH).ok()?.as_secs();
                        Some(Duration::from_secs(reset.saturating_sub(now) + 1))
                    });
                Err(CorpusError::RateLimited { retry_after })
            }
            s => Err(CorpusError::Http(format!("{path}: status {s}"))),
        }
    }
}

impl SearchClient for GitHub {
    fn search(&self, q: &SearchQuery) -> Result<SearchPage, CorpusError> {
        let params = [
            ("q", q.query_string()),
            ("per_page", q.per_page.to_string()),
            ("page", q.page.to_string()),
        ];
        let Some(body) = self.get("/search/repositories", &params)? else {
            return Ok(SearchPage::default());
        };
        let found: Search = body.into_with_config().read_json().map_err(|e| CorpusError::Http(e.to_string()))?;
        Ok(SearchPage {
            total_count: found.total_count,
            items: found
                .items
                .into_iter()
                .map(|r| ProjectRecord {
                    last_commit_date: pushed_date(r.pushed_at.as_deref()),
                    full_name: r.full_name,
                    clone_url: r.clone_url,
                    source: Source::ApiSearch,
                    in_csn: false,
                    has_root_pom: false,
                })
                .collect(),
        })
    }
}

impl RepoProbe for GitHub {
    fn probe(&self, full_name: &str) -> Result<RepoInfo, CorpusError> {
        let body = self
            .get(&format!("/repos/{full_name}"), &[])?
            .ok_or_else(|| CorpusError::Unreachable(full_name.to_string()))?;
        let repo: Repo = body.into_with_config().read_json().map_err(|e| CorpusError::Http(e.to_string()))?;
        let has_root_pom = self.get(&format!("/repos/{full_name}/contents/pom.xml"), &[])?.is_some();
        Ok(RepoInfo {
            full_name: repo.full_name,
            public: !repo.private,
            has_root_pom,
            clone_url: repo.clone_url,
            last_commit_date: pushed_date(repo.pushed_at.as_deref()),
        })
    }
}
