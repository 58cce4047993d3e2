//! Domain types shared across the crate: claims, queries, search results,
//! documents, the evidence memory bank and search-budget accounting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised when constructing domain values that violate their invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("claim text is empty")]
    EmptyClaim,
    #[error("search query text is empty")]
    EmptyQuery,
    #[error("invalid result url {url:?}: {reason}")]
    InvalidUrl { url: String, reason: String },
    #[error("evidence note is empty")]
    EmptyNote,
    #[error("document body is empty")]
    EmptyBody,
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
}

/// Binary veracity label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    True,
    False,
}

impl Verdict {
    pub const ALL: [Verdict; 2] = [Verdict::True, Verdict::False];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::True => "True",
            Verdict::False => "False",
        }
    }
}

impl From<bool> for Verdict {
    fn from(value: bool) -> Self {
        if value {
            Verdict::True
        } else {
            Verdict::False
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "true" => Ok(Verdict::True),
            "false" => Ok(Verdict::False),
            other => Err(format!("not a verdict: {other:?}")),
        }
    }
}

/// An atomic claim under verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<Verdict>,
}

impl Claim {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ModelError::EmptyClaim);
        }
        Ok(Self {
            id: id.into(),
            text,
            gold_label: None,
        })
    }

    pub fn with_gold(mut self, label: Verdict) -> Self {
        self.gold_label = Some(label);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryOrigin {
    Initial,
    Additional,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchQuery {
    pub text: String,
    pub origin: QueryOrigin,
}

impl SearchQuery {
    pub fn new(text: impl Into<String>, origin: QueryOrigin) -> Result<Self, ModelError> {
        let text = text.into();
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(ModelError::EmptyQuery);
        }
        Ok(Self {
            text: trimmed.to_string(),
            origin,
        })
    }
}

/// Checks that `url` is an absolute http(s) URL.
pub fn validate_result_url(url: &str) -> Result<(), ModelError> {
    let invalid = |reason: &str| ModelError::InvalidUrl {
        url: url.to_string(),
        reason: reason.to_string(),
    };
    let parsed = url::Url::parse(url).map_err(|e| invalid(&e.to_string()))?;
    match parsed.scheme() {
        "http" | "https" => {}
        other => return Err(invalid(&format!("unsupported scheme {other}"))),
    }
    if parsed.host_str().is_none_or(str::is_empty) {
        return Err(invalid("missing host"));
    }
    Ok(())
}

/// Dedupe key for a URL: scheme and host lowercased, everything else verbatim.
pub fn url_key(url: &str) -> String {
    let Some((scheme, rest)) = url.split_once("://") else {
        return url.to_string();
    };
    let host_end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let (authority, tail) = rest.split_at(host_end);
    // userinfo is case sensitive; only the host part is lowercased
    let authority = match authority.rsplit_once('@') {
        Some((user, host)) => format!("{user}@{}", host.to_ascii_lowercase()),
        None => authority.to_ascii_lowercase(),
    };
    format!("{}://{}{}", scheme.to_ascii_lowercase(), authority, tail)
}

/// One organic result as returned by the search provider.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResultMeta {
    pub title: String,
    pub url: String,
    pub snippet: String,
    pub source_query: SearchQuery,
}

impl SearchResultMeta {
    pub fn new(
        title: impl Into<String>,
        url: impl Into<String>,
        snippet: impl Into<String>,
        source_query: SearchQuery,
    ) -> Result<Self, ModelError> {
        let url = url.into();
        validate_result_url(&url)?;
        Ok(Self {
            title: title.into(),
            url,
            snippet: snippet.into(),
            source_query,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Acquisition {
    FetchedPage,
    SnippetFallback { reason: String },
}

/// A search result together with the text that was read from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub meta: SearchResultMeta,
    pub body: String,
    pub acquisition: Acquisition,
}

impl Document {
    pub fn new(
        meta: SearchResultMeta,
        body: impl Into<String>,
        acquisition: Acquisition,
    ) -> Result<Self, ModelError> {
        let body = body.into();
        if body.trim().is_empty() {
            return Err(ModelError::EmptyBody);
        }
        Ok(Self {
            meta,
            body,
            acquisition,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub note: String,
    pub source_url: String,
    pub source_title: String,
    pub added_at_step: usize,
}

impl EvidenceItem {
    pub fn new(
        note: impl Into<String>,
        source_url: impl Into<String>,
        source_title: impl Into<String>,
        added_at_step: usize,
    ) -> Result<Self, ModelError> {
        let note = note.into();
        if note.trim().is_empty() {
            return Err(ModelError::EmptyNote);
        }
        let source_url = source_url.into();
        validate_result_url(&source_url)?;
        Ok(Self {
            note,
            source_url,
            source_title: source_title.into(),
            added_at_step,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insertion {
    Added,
    Duplicate,
}

/// Sentinel rendered in place of an empty evidence block.
pub const NO_EVIDENCE: &str = "NO EVIDENCE COLLECTED YET";

/// The memory bank: ordered evidence, at most one item per source URL.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSet {
    items: Vec<EvidenceItem>,
}

impl EvidenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn items(&self) -> &[EvidenceItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains_url(&self, url: &str) -> bool {
        let key = url_key(url);
        self.items.iter().any(|i| url_key(&i.source_url) == key)
    }

    /// Appends `item` unless an item from the same source URL is already present.
    pub fn insert(&mut self, item: EvidenceItem) -> Insertion {
        if self.contains_url(&item.source_url) {
            return Insertion::Duplicate;
        }
        self.items.push(item);
        Insertion::Added
    }

    /// Renders the set as a numbered block of at most `char_budget` characters.
    ///
    /// Items are dropped newest-first until the block fits. If even the first
    /// item alone is too long it is cut at the budget.
    pub fn render(&self, char_budget: usize) -> String {
        if self.items.is_empty() {
            return truncate_chars(NO_EVIDENCE, char_budget).to_string();
        }
        let lines: Vec<String> = self
            .items
            .iter()
            .enumerate()
            .map(|(i, item)| format!("{}. {} (source: {})", i + 1, item.note, item.source_url))
            .collect();
        let mut out = String::new();
        let mut used = 0usize;
        for line in &lines {
            let sep = usize::from(!out.is_empty());
            let len = line.chars().count();
            if used + sep + len > char_budget {
                break;
            }
            if sep == 1 {
                out.push('\n');
            }
            out.push_str(line);
            used += sep + len;
        }
        if out.is_empty() {
            out = truncate_chars(&lines[0], char_budget).to_string();
        }
        out
    }
}

pub(crate) fn truncate_chars(s: &str, max_chars: usize) -> &str {
    match s.char_indices().nth(max_chars) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}

/// Search budget and model settings for one verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub max_search_queries: usize,
    pub max_results_per_query: usize,
    pub model_id: String,
    pub temperature: f64,
}

pub const DEFAULT_MODEL: &str = "gpt-4.1-2025-04-14";

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            max_search_queries: 4,
            max_results_per_query: 2,
            model_id: DEFAULT_MODEL.to_string(),
            temperature: 1.0,
        }
    }
}

impl BudgetConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.max_search_queries < 1 {
            return Err(ModelError::InvalidBudget("max_search_queries must be >= 1".into()));
        }
        if self.max_results_per_query < 1 {
            return Err(ModelError::InvalidBudget(
                "max_results_per_query must be >= 1".into(),
            ));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ModelError::InvalidBudget("temperature must be >= 0".into()));
        }
        if self.model_id.trim().is_empty() {
            return Err(ModelError::InvalidBudget("model id is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("search budget exhausted after {issued} queries")]
pub struct BudgetExhausted {
    pub issued: usize,
}

/// Counts issued search queries against the configured maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    queries_issued: usize,
    config: BudgetConfig,
}

impl BudgetLedger {
    pub fn new(config: BudgetConfig) -> Self {
        Self {
            queries_issued: 0,
            config,
        }
    }

    pub fn queries_issued(&self) -> usize {
        self.queries_issued
    }

    pub fn config(&self) -> &BudgetConfig {
        &self.config
    }

    pub fn remaining(&self) -> usize {
        self.config.max_search_queries - self.queries_issued
    }

    pub fn consume(&mut self) -> Result<(), BudgetExhausted> {
        if self.queries_issued >= self.config.max_search_queries {
            return Err(BudgetExhausted {
                issued: self.queries_issued,
            });
        }
        self.queries_issued += 1;
        Ok(())
    }
}
