//! Page fetching and readable-text extraction, with snippet fallback.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use scraper::{ElementRef, Html, Node};
use thiserror::Error;
use url::Url;

use crate::http::{HttpRequest, HttpTransport, TransportError};
use crate::model::{truncate_chars, Acquisition, Document, SearchResultMeta};

pub const DEFAULT_USER_AGENT: &str = "emulate-verifier/0.1 (+claim verification research)";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FetchError {
    #[error("timed out")]
    Timeout,
    #[error("HTTP {0}")]
    Http(u16),
    #[error("body larger than {0} bytes")]
    TooLarge(usize),
    #[error("unsupported content-type {0:?}")]
    NonHtml(String),
    #[error("more than {0} redirects")]
    TooManyRedirects(usize),
    #[error("bad redirect target {0:?}")]
    BadRedirect(String),
    #[error("disallowed by robots.txt")]
    RobotsDisallowed,
    #[error("invalid url {0:?}")]
    InvalidUrl(String),
    #[error("transport: {0}")]
    Transport(String),
}

impl From<TransportError> for FetchError {
    fn from(err: TransportError) -> Self {
        match err {
            TransportError::Timeout => FetchError::Timeout,
            TransportError::TooLarge(n) => FetchError::TooLarge(n),
            other => FetchError::Transport(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no readable text in document")]
pub struct EmptyExtraction;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("result {url} is unusable: {reason}")]
pub struct Unusable {
    pub url: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub url: String,
    pub content_type: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct ReaderConfig {
    pub timeout: Duration,
    pub max_redirects: usize,
    pub max_bytes: usize,
    /// Documents are cut to this many characters, keeping the head.
    pub body_char_cap: usize,
    /// Extractions shorter than this fall back to the snippet.
    pub min_body_chars: usize,
    pub user_agent: String,
    pub honor_robots: bool,
}

impl Default for ReaderConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(15),
            max_redirects: 5,
            max_bytes: 4 * 1024 * 1024,
            body_char_cap: 12_000,
            min_body_chars: 40,
            user_agent: DEFAULT_USER_AGENT.to_string(),
            honor_robots: true,
        }
    }
}

fn media_type(content_type: &str) -> String {
    content_type.split(';').next().unwrap_or("").trim().to_ascii_lowercase()
}

fn is_readable_type(media: &str) -> bool {
    matches!(media, "text/html" | "application/xhtml+xml" | "text/plain" | "")
}

/// Fetches `url`, following at most `config.max_redirects` redirects.
pub fn fetch(transport: &dyn HttpTransport, url: &str, config: &ReaderConfig) -> Result<RawDocument, FetchError> {
    let mut current = Url::parse(url).map_err(|_| FetchError::InvalidUrl(url.to_string()))?;
    let mut hops = 0;
    loop {
        let request = HttpRequest::get(current.as_str())
            .header("user-agent", config.user_agent.clone())
            .header("accept", "text/html,application/xhtml+xml,text/plain;q=0.9")
            .timeout(config.timeout)
            .max_body_bytes(config.max_bytes);
        let resp = transport.send(&request)?;
        if matches!(resp.status, 301 | 302 | 303 | 307 | 308) {
            if hops == config.max_redirects {
                return Err(FetchError::TooManyRedirects(config.max_redirects));
            }
            let location = resp.header("location").unwrap_or_default().to_string();
            current = current.join(&location).map_err(|_| FetchError::BadRedirect(location.clone()))?;
            if !matches!(current.scheme(), "http" | "https") {
                return Err(FetchError::BadRedirect(location));
            }
            hops += 1;
            continue;
        }
        if !resp.is_success() {
            return Err(FetchError::Http(resp.status));
        }
        let content_type = resp.header("content-type").unwrap_or_default().to_string();
        if !is_readable_type(&media_type(&content_type)) {
            return Err(FetchError::NonHtml(content_type));
        }
        return Ok(RawDocument { url: current.to_string(), content_type, bytes: resp.body });
    }
}

const SKIP_TAGS: &[&str] = &[
    "script", "style", "noscript", "template", "head", "nav", "header", "footer", "aside", "form",
    "iframe", "svg", "canvas", "button", "select", "textarea", "menu", "dialog", "object", "embed",
];

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "section", "article", "main", "h1", "h2", "h3", "h4", "h5", "h6", "ul", "ol", "li",
    "dl", "dt", "dd", "table", "tr", "blockquote", "pre", "figure", "figcaption", "address", "br",
    "hr", "body", "html", "center", "details", "summary",
];

fn is_boilerplate(el: &ElementRef<'_>) -> bool {
    let value = el.value();
    if SKIP_TAGS.contains(&value.name()) || value.attr("hidden").is_some() {
        return true;
    }
    if let Some(role) = value.attr("role") {
        if matches!(role, "navigation" | "banner" | "contentinfo" | "complementary" | "search") {
            return true;
        }
    }
    if value.attr("aria-hidden") == Some("true") {
        return true;
    }
    false
}

fn collect_text(el: ElementRef<'_>, out: &mut String) {
    for child in el.children() {
        match child.value() {
            Node::Text(text) => out.push_str(text),
            Node::Element(_) => {
                let Some(child_el) = ElementRef::wrap(child) else { continue };
                if is_boilerplate(&child_el) {
                    continue;
                }
                let block = BLOCK_TAGS.contains(&child_el.value().name());
                if block {
                    out.push_str("\n\n");
                }
                collect_text(child_el, out);
                if block {
                    out.push_str("\n\n");
                }
            }
            _ => {}
        }
    }
}

/// Collapses runs of whitespace inside paragraphs and separates paragraphs
/// with one blank line.
pub fn normalize_text(text: &str) -> String {
    let mut paragraphs = Vec::new();
    let mut current = Vec::new();
    for line in text.lines() {
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.is_empty() {
            if !current.is_empty() {
                paragraphs.push(current.join(" "));
                current.clear();
            }
        } else {
            current.extend(words);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current.join(" "));
    }
    paragraphs.join("\n\n")
}

/// Main content root: the `<main>` or `<article>` with the most text,
/// otherwise the whole document.
fn content_root(html: &Html) -> ElementRef<'_> {
    let selector = scraper::Selector::parse("main, article, [role=main]").expect("static selector");
    let mut best: Option<(usize, ElementRef<'_>)> = None;
    for el in html.select(&selector) {
        let mut text = String::new();
        collect_text(el, &mut text);
        let len = text.split_whitespace().map(str::len).sum::<usize>();
        if best.as_ref().is_none_or(|(n, _)| len > *n) {
            best = Some((len, el));
        }
    }
    match best {
        Some((len, el)) if len > 0 => el,
        _ => html.root_element(),
    }
}

pub fn extract_html(html: &str) -> Result<String, EmptyExtraction> {
    let doc = Html::parse_document(html);
    let mut raw = String::new();
    let root = content_root(&doc);
    if !is_boilerplate(&root) || root == doc.root_element() {
        collect_text(root, &mut raw);
    }
    let text = normalize_text(&raw);
    if text.is_empty() {
        Err(EmptyExtraction)
    } else {
        Ok(text)
    }
}

pub fn extract_plain(text: &str) -> Result<String, EmptyExtraction> {
    let text = normalize_text(text);
    if text.is_empty() {
        Err(EmptyExtraction)
    } else {
        Ok(text)
    }
}

/// Extracts readable text, dispatching on content type.
pub fn extract_text(raw: &RawDocument) -> Result<String, EmptyExtraction> {
    let text = String::from_utf8_lossy(&raw.bytes);
    if media_type(&raw.content_type) == "text/plain" {
        extract_plain(&text)
    } else {
        extract_html(&text)
    }
}

#[derive(Debug, Clone, Default)]
struct RobotsRules {
    allow: Vec<String>,
    disallow: Vec<String>,
}

fn robots_pattern_matches(pattern: &str, path: &str) -> bool {
    let (pattern, anchored) = match pattern.strip_suffix('$') {
        Some(p) => (p, true),
        None => (pattern, false),
    };
    let parts: Vec<&str> = pattern.split('*').collect();
    let mut pos = 0;
    for (i, part) in parts.iter().enumerate() {
        if i == 0 {
            if !path.starts_with(part) {
                return false;
            }
            pos = part.len();
        } else if let Some(found) = path[pos..].find(part) {
            pos += found + part.len();
        } else {
            return false;
        }
    }
    if anchored {
        if parts.len() > 1 {
            let last = parts.last().unwrap();
            return path.ends_with(last) && pos <= path.len();
        }
        return pos == path.len();
    }
    true
}

impl RobotsRules {
    fn parse(text: &str, agent: &str) -> RobotsRules {
        let agent = agent.to_ascii_lowercase();
        let mut specific: Option<RobotsRules> = None;
        let mut wildcard: Option<RobotsRules> = None;
        let mut group_agents: Vec<String> = Vec::new();
        let mut group = RobotsRules::default();
        let mut in_rules = false;
        let flush = |agents: &[String], rules: &RobotsRules, specific: &mut Option<RobotsRules>, wildcard: &mut Option<RobotsRules>| {
            for a in agents {
                if a == "*" {
                    let w = wildcard.get_or_insert_with(RobotsRules::default);
                    w.allow.extend(rules.allow.iter().cloned());
                    w.disallow.extend(rules.disallow.iter().cloned());
                } else if agent.contains(a.as_str()) {
                    let s = specific.get_or_insert_with(RobotsRules::default);
                    s.allow.extend(rules.allow.iter().cloned());
                    s.disallow.extend(rules.disallow.iter().cloned());
                }
            }
        };
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let Some((key, value)) = line.split_once(':') else { continue };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            match key.as_str() {
                "user-agent" => {
                    if in_rules {
                        flush(&group_agents, &group, &mut specific, &mut wildcard);
                        group_agents.clear();
                        group = RobotsRules::default();
                        in_rules = false;
                    }
                    group_agents.push(value.to_ascii_lowercase());
                }
                "allow" if !value.is_empty() => {
                    in_rules = true;
                    group.allow.push(value.to_string());
                }
                "disallow" => {
                    in_rules = true;
                    if !value.is_empty() {
                        group.disallow.push(value.to_string());
                    }
                }
                _ => {}
            }
        }
        flush(&group_agents, &group, &mut specific, &mut wildcard);
        specific.or(wildcard).unwrap_or_default()
    }

    /// Longest matching rule wins; allow wins ties.
    fn allows(&self, path: &str) -> bool {
        let longest = |rules: &[String]| {
            rules.iter().filter(|p| robots_pattern_matches(p, path)).map(String::len).max()
        };
        match (longest(&self.allow), longest(&self.disallow)) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(d)) => a >= d,
        }
    }
}

/// Gets the readable text behind a search result.
pub trait DocumentSource: Send + Sync {
    fn acquire(&self, result: &SearchResultMeta) -> Result<Document, Unusable>;
}

pub struct PageReader {
    transport: Arc<dyn HttpTransport>,
    config: ReaderConfig,
    robots: Mutex<HashMap<String, Arc<RobotsRules>>>,
}

impl PageReader {
    pub fn new(transport: Arc<dyn HttpTransport>, config: ReaderConfig) -> Self {
        Self { transport, config, robots: Mutex::new(HashMap::new()) }
    }

    pub fn config(&self) -> &ReaderConfig {
        &self.config
    }

    fn robots_for(&self, url: &Url) -> Arc<RobotsRules> {
        let origin = url.origin().ascii_serialization();
        if let Some(rules) = self.robots.lock().unwrap_or_else(|p| p.into_inner()).get(&origin) {
            return rules.clone();
        }
        let robots_url = format!("{origin}/robots.txt");
        let request = HttpRequest::get(&robots_url)
            .header("user-agent", self.config.user_agent.clone())
            .timeout(self.config.timeout)
            .max_body_bytes(512 * 1024);
        // unreachable or missing robots.txt means no restrictions
        let rules = match self.transport.send(&request) {
            Ok(resp) if resp.is_success() => RobotsRules::parse(&resp.text(), &self.config.user_agent),
            _ => RobotsRules::default(),
        };
        let rules = Arc::new(rules);
        self.robots
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(origin, rules.clone());
        rules
    }

    pub fn fetch(&self, url: &str) -> Result<RawDocument, FetchError> {
        if self.config.honor_robots {
            let parsed = Url::parse(url).map_err(|_| FetchError::InvalidUrl(url.to_string()))?;
            let mut path = parsed.path().to_string();
            if let Some(q) = parsed.query() {
                path.push('?');
                path.push_str(q);
            }
            if !self.robots_for(&parsed).allows(&path) {
                return Err(FetchError::RobotsDisallowed);
            }
        }
        fetch(self.transport.as_ref(), url, &self.config)
    }

    fn read_page(&self, url: &str) -> Result<String, String> {
        let raw = self.fetch(url).map_err(|e| format!("fetch failed: {e}"))?;
        let text = extract_text(&raw).map_err(|e| e.to_string())?;
        if text.chars().count() < self.config.min_body_chars {
            return Err(format!("extracted text shorter than {} chars", self.config.min_body_chars));
        }
        Ok(truncate_chars(&text, self.config.body_char_cap).to_string())
    }
}

/// Title plus snippet, used when the page itself cannot be read.
pub fn snippet_fallback_body(result: &SearchResultMeta) -> String {
    [result.title.trim(), result.snippet.trim()]
        .iter()
        .filter(|s| !s.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join("\n\n")
}

impl DocumentSource for PageReader {
    fn acquire(&self, result: &SearchResultMeta) -> Result<Document, Unusable> {
        match self.read_page(&result.url) {
            Ok(body) => Document::new(result.clone(), body, Acquisition::FetchedPage)
                .map_err(|e| Unusable { url: result.url.clone(), reason: e.to_string() }),
            Err(reason) => {
                log::debug!("{}: {reason}", result.url);
                if result.snippet.trim().is_empty() {
                    return Err(Unusable { url: result.url.clone(), reason: format!("{reason}; no snippet") });
                }
                let body = snippet_fallback_body(result);
                let body = truncate_chars(&body, self.config.body_char_cap).to_string();
                Document::new(result.clone(), body, Acquisition::SnippetFallback { reason })
                    .map_err(|e| Unusable { url: result.url.clone(), reason: e.to_string() })
            }
        }
    }
}
