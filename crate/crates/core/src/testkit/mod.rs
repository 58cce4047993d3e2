//! In-process doubles for the gateways: scripted agents, canned search
//! results, canned pages and a fake HTTP transport. Used by the test suites
//! and benchmarks; none of them touch the network.

pub mod scenario;
pub mod web;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::agents::{AgentKind, PromptSet};
use crate::http::{HttpRequest, HttpResponse, HttpTransport, TransportError};
use crate::llm::{ChatBackend, ChatRequest, ChatResponse, LlmError, Role};
use crate::model::{Acquisition, Document, SearchQuery, SearchResultMeta};
use crate::reader::{DocumentSource, Unusable};
use crate::search::{SearchError, SearchProvider};

type Responder = dyn Fn(AgentKind, &ChatRequest) -> String + Send + Sync;

/// Chat backend that answers according to which agent is asking.
pub struct ScriptedLlm {
    prompts: Arc<PromptSet>,
    responder: Box<Responder>,
    calls: Mutex<Vec<(AgentKind, ChatRequest)>>,
}

impl ScriptedLlm {
    pub fn new(prompts: Arc<PromptSet>, responder: impl Fn(AgentKind, &ChatRequest) -> String + Send + Sync + 'static) -> Self {
        Self { prompts, responder: Box::new(responder), calls: Mutex::new(Vec::new()) }
    }

    pub fn calls(&self) -> Vec<(AgentKind, ChatRequest)> {
        self.calls.lock().unwrap().clone()
    }

    pub fn count(&self, agent: AgentKind) -> usize {
        self.calls.lock().unwrap().iter().filter(|(a, _)| *a == agent).count()
    }

    pub fn total(&self) -> usize {
        self.calls.lock().unwrap().len()
    }
}

impl ChatBackend for ScriptedLlm {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let agent = self
            .prompts
            .identify(request)
            .ok_or_else(|| LlmError::FixtureMiss("request from unknown agent".into()))?;
        self.calls.lock().unwrap().push((agent, request.clone()));
        Ok(ChatResponse::text((self.responder)(agent, request)))
    }
}

/// Text of the last user message in `request`.
pub fn user_text(request: &ChatRequest) -> &str {
    request
        .messages
        .iter()
        .rev()
        .find(|m| m.role == Role::User)
        .map(|m| m.content.as_str())
        .unwrap_or("")
}

/// The `URL:` line of a rendered document prompt.
pub fn document_url(request: &ChatRequest) -> Option<&str> {
    let text = user_text(request);
    let start = text.find("New page:")?;
    text[start..].lines().find_map(|l| l.strip_prefix("URL: "))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hit {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

impl Hit {
    pub fn new(title: &str, url: &str, snippet: &str) -> Self {
        Self { title: title.into(), url: url.into(), snippet: snippet.into() }
    }
}

type SearchFn = dyn Fn(&str) -> Result<Vec<Hit>, SearchError> + Send + Sync;

/// Search provider answering from a closure over the query text.
pub struct StaticSearch {
    answer: Box<SearchFn>,
    calls: Mutex<Vec<(String, usize)>>,
}

impl StaticSearch {
    pub fn new(answer: impl Fn(&str) -> Result<Vec<Hit>, SearchError> + Send + Sync + 'static) -> Self {
        Self { answer: Box::new(answer), calls: Mutex::new(Vec::new()) }
    }

    pub fn from_map(map: HashMap<String, Vec<Hit>>) -> Self {
        Self::new(move |q| Ok(map.get(q).cloned().unwrap_or_default()))
    }

    pub fn calls(&self) -> Vec<(String, usize)> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }
}

impl SearchProvider for StaticSearch {
    fn search(&self, query: &SearchQuery, k: usize) -> Result<Vec<SearchResultMeta>, SearchError> {
        if k == 0 {
            return Err(SearchError::InvalidK);
        }
        self.calls.lock().unwrap().push((query.text.clone(), k));
        let hits = (self.answer)(&query.text)?;
        Ok(hits
            .into_iter()
            .filter_map(|h| SearchResultMeta::new(h.title, h.url, h.snippet, query.clone()).ok())
            .take(k)
            .collect())
    }
}

type PageFn = dyn Fn(&str) -> Option<String> + Send + Sync;

/// Document source serving bodies from a closure over the URL. URLs with no
/// body fall back to the snippet, or are unusable without one.
pub struct StaticPages {
    body: Box<PageFn>,
    calls: AtomicUsize,
}

impl StaticPages {
    pub fn new(body: impl Fn(&str) -> Option<String> + Send + Sync + 'static) -> Self {
        Self { body: Box::new(body), calls: AtomicUsize::new(0) }
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl DocumentSource for StaticPages {
    fn acquire(&self, result: &SearchResultMeta) -> Result<Document, Unusable> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let unusable = |reason: &str| Unusable { url: result.url.clone(), reason: reason.into() };
        match (self.body)(&result.url) {
            Some(body) => Document::new(result.clone(), body, Acquisition::FetchedPage).map_err(|e| unusable(&e.to_string())),
            None if !result.snippet.trim().is_empty() => Document::new(
                result.clone(),
                crate::reader::snippet_fallback_body(result),
                Acquisition::SnippetFallback { reason: "no page".into() },
            )
            .map_err(|e| unusable(&e.to_string())),
            None => Err(unusable("no page and no snippet")),
        }
    }
}

type Handler = dyn Fn(&HttpRequest) -> Result<HttpResponse, TransportError> + Send + Sync;

/// HTTP transport routed to a closure; counts requests.
pub struct FakeTransport {
    handler: Box<Handler>,
    calls: AtomicUsize,
}

impl FakeTransport {
    pub fn new(handler: impl Fn(&HttpRequest) -> Result<HttpResponse, TransportError> + Send + Sync + 'static) -> Self {
        Self { handler: Box::new(handler), calls: AtomicUsize::new(0) }
    }

    /// A transport that fails the test if it is ever used.
    pub fn forbidden() -> Self {
        Self::new(|req| panic!("unexpected network request to {}", req.url))
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl HttpTransport for FakeTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.handler)(request)
    }
}
