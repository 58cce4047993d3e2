//! Chat-completion gateway: an OpenAI-compatible HTTP backend plus a
//! file-backed record/replay store keyed by a digest of the request.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::http::{is_transient_status, sha256_hex, HttpRequest, HttpTransport, RetryPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

impl ChatResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), usage: None }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("chat transport failed: {0}")]
    Transport(String),
    #[error("chat endpoint rejected credentials (HTTP {0})")]
    Auth(u16),
    #[error("chat endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed chat response: {0}")]
    Malformed(String),
    #[error("chat endpoint returned an empty completion")]
    EmptyResponse,
    #[error("no recorded response for request {0}")]
    FixtureMiss(String),
    #[error("fixture storage failed: {0}")]
    Storage(String),
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        if self.messages.iter().any(|m| m.content.trim().is_empty()) {
            return Err(LlmError::InvalidRequest("empty message content".into()));
        }
        Ok(())
    }

    /// Canonical form used for hashing and stored alongside fixtures.
    pub fn canonical(&self) -> ChatRequest {
        ChatRequest {
            model_id: self.model_id.clone(),
            temperature: self.temperature,
            messages: self
                .messages
                .iter()
                .map(|m| Message { role: m.role, content: m.content.trim_end().to_string() })
                .collect(),
        }
    }

    pub fn replay_key(&self) -> ReplayKey {
        let canonical = self.canonical();
        let bytes = serde_json::to_vec(&canonical).expect("request serializes");
        ReplayKey(sha256_hex(&bytes))
    }
}

/// Stable digest of (model, temperature, canonical messages).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReplayKey(pub String);

impl std::fmt::Display for ReplayKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

/// Live backend speaking the `/chat/completions` JSON protocol.
pub struct OpenAiChat {
    base_url: String,
    api_key: Option<String>,
    transport: Arc<dyn HttpTransport>,
    retry: RetryPolicy,
}

impl OpenAiChat {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, transport: Arc<dyn HttpTransport>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            transport,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

impl ChatBackend for OpenAiChat {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let body = json!({
            "model": request.model_id,
            "temperature": request.temperature,
            "messages": request.messages,
        });
        let mut http = HttpRequest::post_json(self.endpoint(), &body);
        if let Some(key) = &self.api_key {
            http = http.header("authorization", format!("Bearer {key}"));
        }
        let resp = self
            .retry
            .send(self.transport.as_ref(), &http, is_transient_status)
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        match resp.status {
            401 | 403 => return Err(LlmError::Auth(resp.status)),
            s if is_transient_status(s) => {
                return Err(LlmError::Transport(format!("HTTP {s} after {} attempts", self.retry.max_attempts())))
            }
            s if !(200..300).contains(&s) => {
                return Err(LlmError::Http { status: s, body: resp.text() })
            }
            _ => {}
        }
        let wire: WireResponse =
            serde_json::from_slice(&resp.body).map_err(|e| LlmError::Malformed(e.to_string()))?;
        let text = wire
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Malformed("no choices".into()))?;
        if text.trim().is_empty() {
            return Err(LlmError::EmptyResponse);
        }
        Ok(ChatResponse { text, usage: wire.usage })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub key: ReplayKey,
    pub request: ChatRequest,
    pub response: ChatResponse,
}

/// Directory of chat fixtures, one `<digest>.json` file per request.
pub struct FixtureStore {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), write_lock: Mutex::new(()) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &ReplayKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.0))
    }

    pub fn lookup(&self, key: &ReplayKey) -> Result<Option<FixtureEntry>, LlmError> {
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(LlmError::Storage(e.to_string())),
        };
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| LlmError::Storage(format!("corrupt fixture {}: {e}", path.display())))
    }

    /// Stores the pair. Re-recording an identical pair leaves the file untouched.
    pub fn record(&self, request: &ChatRequest, response: &ChatResponse) -> Result<(), LlmError> {
        let key = request.replay_key();
        let entry = FixtureEntry { key: key.clone(), request: request.canonical(), response: response.clone() };
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        if self.lookup(&key)?.as_ref() == Some(&entry) {
            return Ok(());
        }
        fs::create_dir_all(&self.dir).map_err(|e| LlmError::Storage(e.to_string()))?;
        let mut text = serde_json::to_string_pretty(&entry).expect("fixture serializes");
        text.push('\n');
        fs::write(self.path_for(&key), text).map_err(|e| LlmError::Storage(e.to_string()))
    }

    pub fn list(&self) -> Result<Vec<ReplayKey>, LlmError> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(LlmError::Storage(e.to_string())),
        };
        let mut keys: Vec<ReplayKey> = entries
            .filter_map(Result::ok)
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_suffix(".json").map(|s| ReplayKey(s.to_string()))
            })
            .collect();
        keys.sort();
        Ok(keys)
    }
}

/// Answers only from recorded fixtures; never touches the network.
pub struct ReplayChat {
    store: FixtureStore,
}

impl ReplayChat {
    pub fn new(store: FixtureStore) -> Self {
        Self { store }
    }
}

impl ChatBackend for ReplayChat {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let key = request.replay_key();
        match self.store.lookup(&key)? {
            Some(entry) => Ok(entry.response),
            None => Err(LlmError::FixtureMiss(key.0)),
        }
    }
}

/// Forwards to `inner` and stores every successful exchange.
pub struct RecordingChat {
    inner: Arc<dyn ChatBackend>,
    store: FixtureStore,
}

impl RecordingChat {
    pub fn new(inner: Arc<dyn ChatBackend>, store: FixtureStore) -> Self {
        Self { inner, store }
    }
}

impl ChatBackend for RecordingChat {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let response = self.inner.complete(request)?;
        self.store.record(request, &response)?;
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::{HttpResponse, TransportError};
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn request(content: &str, temperature: f64) -> ChatRequest {
        ChatRequest {
            model_id: "m".into(),
            messages: vec![Message::system("sys"), Message::user(content)],
            temperature,
        }
    }

    struct Canned {
        status: u16,
        body: String,
        calls: AtomicUsize,
    }

    impl HttpTransport for Canned {
        fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            assert!(req.url.ends_with("/chat/completions"));
            Ok(HttpResponse::new(self.status, self.body.clone()))
        }
    }

    fn canned(status: u16, body: &str) -> Arc<Canned> {
        Arc::new(Canned { status, body: body.into(), calls: AtomicUsize::new(0) })
    }

    #[test]
    fn parses_openai_shape() {
        let t = canned(200, r#"{"choices":[{"message":{"role":"assistant","content":"True"}}],"usage":{"prompt_tokens":5,"completion_tokens":1}}"#);
        let chat = OpenAiChat::new("http://h/v1/", None, t);
        let resp = chat.complete(&request("x", 1.0)).unwrap();
        assert_eq!(resp.text, "True");
        assert_eq!(resp.usage, Some(Usage { prompt_tokens: 5, completion_tokens: 1 }));
    }

    #[test]
    fn auth_errors_are_not_retried() {
        let t = canned(401, "nope");
        let chat = OpenAiChat::new("http://h", Some("k".into()), t.clone()).with_retry(RetryPolicy::immediate(3));
        assert!(matches!(chat.complete(&request("x", 1.0)), Err(LlmError::Auth(401))));
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn server_errors_retry_then_fail() {
        let t = canned(502, "bad gateway");
        let chat = OpenAiChat::new("http://h", None, t.clone()).with_retry(RetryPolicy::immediate(3));
        assert!(matches!(chat.complete(&request("x", 1.0)), Err(LlmError::Transport(_))));
        assert_eq!(t.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn empty_completion_is_an_error() {
        let t = canned(200, r#"{"choices":[{"message":{"content":"  "}}]}"#);
        let chat = OpenAiChat::new("http://h", None, t);
        assert!(matches!(chat.complete(&request("x", 1.0)), Err(LlmError::EmptyResponse)));
    }

    #[test]
    fn request_requires_non_empty_messages() {
        let mut req = request("x", 1.0);
        req.messages.clear();
        assert!(req.validate().is_err());
        assert!(request(" ", 1.0).validate().is_err());
    }

    #[test]
    fn replay_returns_recorded_text() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        store.record(&request("q", 1.0), &ChatResponse::text("True")).unwrap();
        let replay = ReplayChat::new(FixtureStore::new(dir.path()));
        assert_eq!(replay.complete(&request("q", 1.0)).unwrap().text, "True");
    }

    #[test]
    fn replay_miss_is_loud() {
        let dir = tempfile::tempdir().unwrap();
        let replay = ReplayChat::new(FixtureStore::new(dir.path()));
        assert!(matches!(replay.complete(&request("q", 1.0)), Err(LlmError::FixtureMiss(_))));
    }

    #[test]
    fn record_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        store.record(&request("q", 1.0), &ChatResponse::text("a")).unwrap();
        assert_eq!(store.list().unwrap().len(), 1);
        store.record(&request("q", 1.0), &ChatResponse::text("a")).unwrap();
        assert_eq!(store.list().unwrap().len(), 1);
    }

    #[test]
    fn temperature_is_part_of_the_key() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        let a = request("q", 1.0);
        let b = request("q", 0.0);
        assert_ne!(a.replay_key(), b.replay_key());
        store.record(&a, &ChatResponse::text("a")).unwrap();
        store.record(&b, &ChatResponse::text("a")).unwrap();
        assert_eq!(store.list().unwrap().len(), 2);
    }

    proptest! {
        #[test]
        fn trailing_whitespace_does_not_change_digest(content in "[a-zA-Z0-9 .,]{1,40}[a-z]", pad in "[ \t\n]{1,5}") {
            let base = request(&content, 1.0);
            let padded = request(&format!("{content}{pad}"), 1.0);
            prop_assert_eq!(base.replay_key(), padded.replay_key());
        }

        #[test]
        fn visible_changes_change_digest(content in "[a-z]{1,40}", extra in "[a-z0-9]") {
            let base = request(&content, 1.0);
            let changed = request(&format!("{content}{extra}"), 1.0);
            prop_assert_ne!(base.replay_key(), changed.replay_key());
        }
    }
}
