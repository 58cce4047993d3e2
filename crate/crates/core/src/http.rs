//! Minimal blocking HTTP abstraction shared by the gateways.
//!
//! Every network operation in the crate goes through [`HttpTransport`], so
//! tests can substitute an in-process fake and count calls.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Get,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: Option<Vec<u8>>,
    pub timeout: Option<Duration>,
    /// Reject bodies larger than this many bytes.
    pub max_body_bytes: Option<usize>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: Method::Get,
            url: url.into(),
            headers: Vec::new(),
            body: None,
            timeout: None,
            max_body_bytes: None,
        }
    }

    pub fn post_json(url: impl Into<String>, body: &serde_json::Value) -> Self {
        Self {
            method: Method::Post,
            url: url.into(),
            headers: vec![("content-type".into(), "application/json".into())],
            body: Some(serde_json::to_vec(body).expect("json value serializes")),
            timeout: None,
            max_body_bytes: None,
        }
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_ascii_lowercase(), value.into()));
        self
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }

    pub fn max_body_bytes(mut self, cap: usize) -> Self {
        self.max_body_bytes = Some(cap);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn new(status: u16, body: impl Into<Vec<u8>>) -> Self {
        Self {
            status,
            headers: Vec::new(),
            body: body.into(),
        }
    }

    pub fn with_header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.push((name.to_ascii_lowercase(), value.into()));
        self
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("response body exceeds {0} bytes")]
    TooLarge(usize),
    #[error("transport error: {0}")]
    Other(String),
    #[error("no recorded response for {0}")]
    FixtureMiss(String),
}

pub trait HttpTransport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

/// Live transport over `reqwest::blocking`. Redirects are not followed here;
/// callers that need them handle `Location` themselves.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(user_agent: &str) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(user_agent)
            .redirect(reqwest::redirect::Policy::none())
            .build()
            .map_err(|e| TransportError::Other(e.to_string()))?;
        Ok(Self { client })
    }
}

fn map_reqwest_error(err: reqwest::Error) -> TransportError {
    if err.is_timeout() {
        TransportError::Timeout
    } else if err.is_connect() {
        TransportError::Connect(err.to_string())
    } else {
        TransportError::Other(err.to_string())
    }
}

impl HttpTransport for ReqwestTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut builder = match request.method {
            Method::Get => self.client.get(&request.url),
            Method::Post => self.client.post(&request.url),
        };
        for (name, value) in &request.headers {
            builder = builder.header(name.as_str(), value.as_str());
        }
        if let Some(body) = &request.body {
            builder = builder.body(body.clone());
        }
        if let Some(timeout) = request.timeout {
            builder = builder.timeout(timeout);
        }
        let response = builder.send().map_err(map_reqwest_error)?;
        let status = response.status().as_u16();
        let headers = response
            .headers()
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_string(), v.to_str().ok()?.to_string())))
            .collect();
        let mut body = Vec::new();
        match request.max_body_bytes {
            Some(cap) => {
                let read = response
                    .take(cap as u64 + 1)
                    .read_to_end(&mut body)
                    .map_err(|e| TransportError::Other(e.to_string()))?;
                if read > cap {
                    return Err(TransportError::TooLarge(cap));
                }
            }
            None => {
                let mut response = response;
                response
                    .read_to_end(&mut body)
                    .map_err(|e| TransportError::Other(e.to_string()))?;
            }
        }
        Ok(HttpResponse { status, headers, body })
    }
}

/// Backoff schedule: one initial attempt plus one retry per delay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub delays: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            delays: vec![Duration::from_secs(1), Duration::from_secs(2), Duration::from_secs(4)],
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self { delays: Vec::new() }
    }

    /// Retries without sleeping, for tests.
    pub fn immediate(retries: usize) -> Self {
        Self { delays: vec![Duration::ZERO; retries] }
    }

    pub fn max_attempts(&self) -> usize {
        self.delays.len() + 1
    }

    /// Sends `request`, retrying on transport errors and on statuses
    /// `should_retry` accepts. Returns the last response or error.
    pub fn send(
        &self,
        transport: &dyn HttpTransport,
        request: &HttpRequest,
        should_retry: impl Fn(u16) -> bool,
    ) -> Result<HttpResponse, TransportError> {
        let mut attempt = 0;
        loop {
            let result = transport.send(request);
            let retryable = match &result {
                Ok(resp) => should_retry(resp.status),
                Err(TransportError::FixtureMiss(_)) => false,
                Err(_) => true,
            };
            if !retryable || attempt >= self.delays.len() {
                return result;
            }
            log::debug!("retrying {} (attempt {})", request.url, attempt + 2);
            thread::sleep(self.delays[attempt]);
            attempt += 1;
        }
    }
}

pub fn is_transient_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Record,
    Replay,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            other => Err(format!("unknown mode {other:?} (expected live, record or replay)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CassetteEntry {
    method: Method,
    url: String,
    status: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    content_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    location: Option<String>,
    body: String,
}

/// Record/replay wrapper keyed by method and URL. Stores one JSON file per
/// request so fixtures stay reviewable. Only the content-type and location
/// headers survive a round trip.
pub struct CassetteTransport {
    dir: PathBuf,
    inner: Option<Arc<dyn HttpTransport>>,
    write_lock: Mutex<()>,
}

impl CassetteTransport {
    pub fn recording(dir: impl Into<PathBuf>, inner: Arc<dyn HttpTransport>) -> Self {
        Self { dir: dir.into(), inner: Some(inner), write_lock: Mutex::new(()) }
    }

    pub fn replaying(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), inner: None, write_lock: Mutex::new(()) }
    }

    fn path_for(&self, request: &HttpRequest) -> PathBuf {
        let key = format!("{:?} {}", request.method, request.url);
        self.dir.join(format!("{}.json", sha256_hex(key.as_bytes())))
    }

    fn store(&self, path: &Path, entry: &CassetteEntry) -> Result<(), TransportError> {
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        fs::create_dir_all(&self.dir).map_err(|e| TransportError::Other(e.to_string()))?;
        let mut text = serde_json::to_string_pretty(entry).expect("entry serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| TransportError::Other(e.to_string()))
    }
}

impl HttpTransport for CassetteTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let path = self.path_for(request);
        match &self.inner {
            None => {
                let text = fs::read_to_string(&path)
                    .map_err(|_| TransportError::FixtureMiss(request.url.clone()))?;
                let entry: CassetteEntry = serde_json::from_str(&text)
                    .map_err(|e| TransportError::Other(format!("corrupt fixture {}: {e}", path.display())))?;
                let mut resp = HttpResponse::new(entry.status, entry.body.into_bytes());
                if let Some(ct) = entry.content_type {
                    resp = resp.with_header("content-type", ct);
                }
                if let Some(loc) = entry.location {
                    resp = resp.with_header("location", loc);
                }
                if let Some(cap) = request.max_body_bytes {
                    if resp.body.len() > cap {
                        return Err(TransportError::TooLarge(cap));
                    }
                }
                Ok(resp)
            }
            Some(inner) => {
                let resp = inner.send(request)?;
                let entry = CassetteEntry {
                    method: request.method,
                    url: request.url.clone(),
                    status: resp.status,
                    content_type: resp.header("content-type").map(str::to_string),
                    location: resp.header("location").map(str::to_string),
                    body: resp.text(),
                };
                self.store(&path, &entry)?;
                Ok(resp)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Flaky {
        calls: AtomicUsize,
        fail_first: usize,
        status: u16,
    }

    impl HttpTransport for Flaky {
        fn send(&self, _request: &HttpRequest) -> Result<HttpResponse, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Ok(HttpResponse::new(self.status, "busy"))
            } else {
                Ok(HttpResponse::new(200, "ok"))
            }
        }
    }

    #[test]
    fn retries_transient_statuses_then_succeeds() {
        let t = Flaky { calls: AtomicUsize::new(0), fail_first: 2, status: 503 };
        let resp = RetryPolicy::immediate(3)
            .send(&t, &HttpRequest::get("http://x"), is_transient_status)
            .unwrap();
        assert_eq!(resp.status, 200);
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gives_up_after_budget() {
        let t = Flaky { calls: AtomicUsize::new(0), fail_first: 10, status: 500 };
        let resp = RetryPolicy::immediate(3)
            .send(&t, &HttpRequest::get("http://x"), is_transient_status)
            .unwrap();
        assert_eq!(resp.status, 500);
        assert_eq!(t.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn does_not_retry_client_errors() {
        let t = Flaky { calls: AtomicUsize::new(0), fail_first: 10, status: 401 };
        let resp = RetryPolicy::immediate(3)
            .send(&t, &HttpRequest::get("http://x"), is_transient_status)
            .unwrap();
        assert_eq!(resp.status, 401);
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn default_policy_matches_backoff_schedule() {
        let p = RetryPolicy::default();
        assert_eq!(p.max_attempts(), 4);
        assert_eq!(p.delays[2], Duration::from_secs(4));
    }

    #[test]
    fn cassette_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let inner = Arc::new(Flaky { calls: AtomicUsize::new(0), fail_first: 0, status: 200 });
        let rec = CassetteTransport::recording(dir.path(), inner.clone());
        let req = HttpRequest::get("https://a.org/page");
        let live = rec.send(&req).unwrap();
        let replay = CassetteTransport::replaying(dir.path());
        assert_eq!(replay.send(&req).unwrap().body, live.body);
        assert_eq!(inner.calls.load(Ordering::SeqCst), 1);
        assert!(matches!(
            replay.send(&HttpRequest::get("https://a.org/other")),
            Err(TransportError::FixtureMiss(_))
        ));
    }
}
