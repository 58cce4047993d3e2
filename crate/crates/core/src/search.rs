//! Web search client for serper-style endpoints, plus fixture backends.

use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::http::{is_transient_status, sha256_hex, HttpRequest, HttpTransport, RetryPolicy, TransportError};
use crate::model::{SearchQuery, SearchResultMeta};

pub const DEFAULT_SEARCH_ENDPOINT: &str = "https://google.serper.dev/search";

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("k must be at least 1")]
    InvalidK,
    #[error("invalid search provider config: {0}")]
    Config(String),
    #[error("search transport failed: {0}")]
    Transport(String),
    #[error("search quota exceeded (HTTP 429)")]
    Quota,
    #[error("search provider rejected credentials (HTTP {0})")]
    Auth(u16),
    #[error("malformed search response: {0}")]
    Malformed(String),
    #[error("no recorded search results for {query:?} (k={k})")]
    FixtureMiss { query: String, k: usize },
    #[error("fixture storage failed: {0}")]
    Storage(String),
}

impl SearchError {
    /// Errors that mean the run itself is misconfigured, as opposed to one
    /// query coming back empty.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            SearchError::Auth(_) | SearchError::Config(_) | SearchError::FixtureMiss { .. } | SearchError::Storage(_)
        )
    }
}

pub trait SearchProvider: Send + Sync {
    fn search(&self, query: &SearchQuery, k: usize) -> Result<Vec<SearchResultMeta>, SearchError>;
}

#[derive(Debug, Deserialize)]
struct OrganicResponse {
    #[serde(default)]
    organic: Vec<OrganicItem>,
}

#[derive(Debug, Deserialize)]
struct OrganicItem {
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    link: Option<String>,
    #[serde(default)]
    snippet: Option<String>,
}

/// Parses a provider response body, keeping at most `k` results in provider
/// order and dropping entries whose link is not an absolute http(s) URL.
pub fn parse_organic(body: &[u8], query: &SearchQuery, k: usize) -> Result<Vec<SearchResultMeta>, SearchError> {
    let resp: OrganicResponse =
        serde_json::from_slice(body).map_err(|e| SearchError::Malformed(e.to_string()))?;
    let mut out = Vec::with_capacity(k);
    for item in resp.organic {
        if out.len() == k {
            break;
        }
        let link = item.link.unwrap_or_default();
        match SearchResultMeta::new(
            item.title.unwrap_or_default(),
            link,
            item.snippet.unwrap_or_default(),
            query.clone(),
        ) {
            Ok(meta) => out.push(meta),
            Err(e) => log::warn!("dropping search result: {e}"),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchProviderConfig {
    pub endpoint: String,
    pub api_key: String,
    /// e.g. `en-US`; sent as `hl`/`gl` when set.
    pub default_locale: Option<String>,
    pub requests_per_second: f64,
}

impl SearchProviderConfig {
    pub fn new(api_key: impl Into<String>) -> Self {
        Self {
            endpoint: DEFAULT_SEARCH_ENDPOINT.to_string(),
            api_key: api_key.into(),
            default_locale: None,
            requests_per_second: 5.0,
        }
    }
}

/// Spaces requests at least `1 / rps` apart.
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        let interval = if requests_per_second > 0.0 {
            Duration::from_secs_f64(1.0 / requests_per_second)
        } else {
            Duration::ZERO
        };
        Self { interval, next: Mutex::new(None) }
    }

    pub fn wait(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

pub struct SerperClient {
    config: SearchProviderConfig,
    transport: Arc<dyn HttpTransport>,
    retry: RetryPolicy,
    limiter: RateLimiter,
}

impl SerperClient {
    pub fn new(config: SearchProviderConfig, transport: Arc<dyn HttpTransport>) -> Result<Self, SearchError> {
        let parsed = url::Url::parse(&config.endpoint).map_err(|e| SearchError::Config(e.to_string()))?;
        if parsed.scheme() != "https" {
            return Err(SearchError::Config(format!("endpoint must be https: {}", config.endpoint)));
        }
        let limiter = RateLimiter::new(config.requests_per_second);
        Ok(Self { config, transport, retry: RetryPolicy::default(), limiter })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn request_body(&self, query: &str, k: usize) -> serde_json::Value {
        let mut body = json!({ "q": query, "num": k });
        if let Some(locale) = &self.config.default_locale {
            let mut parts = locale.split(['-', '_']);
            if let Some(lang) = parts.next() {
                body["hl"] = json!(lang.to_ascii_lowercase());
            }
            if let Some(region) = parts.next() {
                body["gl"] = json!(region.to_ascii_lowercase());
            }
        }
        body
    }

    /// Issues the query and returns the raw response body.
    pub fn search_raw(&self, query: &str, k: usize) -> Result<Vec<u8>, SearchError> {
        if k == 0 {
            return Err(SearchError::InvalidK);
        }
        self.limiter.wait();
        let request = HttpRequest::post_json(&self.config.endpoint, &self.request_body(query, k))
            .header("x-api-key", self.config.api_key.clone());
        let resp = self
            .retry
            .send(self.transport.as_ref(), &request, is_transient_status)
            .map_err(|e| match e {
                TransportError::FixtureMiss(_) => SearchError::FixtureMiss { query: query.to_string(), k },
                other => SearchError::Transport(other.to_string()),
            })?;
        match resp.status {
            401 | 403 => Err(SearchError::Auth(resp.status)),
            429 => Err(SearchError::Quota),
            s if (200..300).contains(&s) => Ok(resp.body),
            s => Err(SearchError::Transport(format!("HTTP {s}"))),
        }
    }
}

impl SearchProvider for SerperClient {
    fn search(&self, query: &SearchQuery, k: usize) -> Result<Vec<SearchResultMeta>, SearchError> {
        let body = self.search_raw(&query.text, k)?;
        parse_organic(&body, query, k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SearchFixture {
    query: String,
    k: usize,
    response: serde_json::Value,
}

/// Search fixtures on disk, one file per (query text, k).
#[derive(Debug, Clone)]
pub struct SearchFixtures {
    dir: PathBuf,
}

impl SearchFixtures {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn path_for(&self, query: &str, k: usize) -> PathBuf {
        let key = format!("{query}\u{0}{k}");
        self.dir.join(format!("{}.json", sha256_hex(key.as_bytes())))
    }

    pub fn load(&self, query: &str, k: usize) -> Result<Vec<u8>, SearchError> {
        let text = fs::read_to_string(self.path_for(query, k))
            .map_err(|_| SearchError::FixtureMiss { query: query.to_string(), k })?;
        let fixture: SearchFixture =
            serde_json::from_str(&text).map_err(|e| SearchError::Storage(e.to_string()))?;
        Ok(serde_json::to_vec(&fixture.response).expect("value serializes"))
    }

    /// Stores a raw provider body for (query, k).
    pub fn store(&self, query: &str, k: usize, body: &[u8]) -> Result<(), SearchError> {
        let response: serde_json::Value =
            serde_json::from_slice(body).map_err(|e| SearchError::Malformed(e.to_string()))?;
        let fixture = SearchFixture { query: query.to_string(), k, response };
        fs::create_dir_all(&self.dir).map_err(|e| SearchError::Storage(e.to_string()))?;
        let mut text = serde_json::to_string_pretty(&fixture).expect("fixture serializes");
        text.push('\n');
        fs::write(self.path_for(query, k), text).map_err(|e| SearchError::Storage(e.to_string()))
    }
}

/// Answers from fixtures only.
pub struct ReplaySearch {
    fixtures: SearchFixtures,
}

impl ReplaySearch {
    pub fn new(fixtures: SearchFixtures) -> Self {
        Self { fixtures }
    }
}

impl SearchProvider for ReplaySearch {
    fn search(&self, query: &SearchQuery, k: usize) -> Result<Vec<SearchResultMeta>, SearchError> {
        if k == 0 {
            return Err(SearchError::InvalidK);
        }
        let body = self.fixtures.load(&query.text, k)?;
        parse_organic(&body, query, k)
    }
}

/// Live client that stores every successful response body.
pub struct RecordingSearch {
    inner: SerperClient,
    fixtures: SearchFixtures,
}

impl RecordingSearch {
    pub fn new(inner: SerperClient, fixtures: SearchFixtures) -> Self {
        Self { inner, fixtures }
    }
}

impl SearchProvider for RecordingSearch {
    fn search(&self, query: &SearchQuery, k: usize) -> Result<Vec<SearchResultMeta>, SearchError> {
        let body = self.inner.search_raw(&query.text, k)?;
        self.fixtures.store(&query.text, k, &body)?;
        parse_organic(&body, query, k)
    }
}
