//! Wiring of the three gateways for a given mode.
//!
//! Credentials come from `OPENAI_API_KEY` and `SERPER_API_KEY`;
//! `OPENAI_BASE_URL` overrides the chat endpoint. Fixtures live under
//! `<dir>/llm`, `<dir>/search` and `<dir>/pages`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::http::{CassetteTransport, HttpTransport, Mode, ReqwestTransport};
use crate::llm::{ChatBackend, FixtureStore, OpenAiChat, RecordingChat, ReplayChat};
use crate::reader::{DocumentSource, PageReader, ReaderConfig, DEFAULT_USER_AGENT};
use crate::search::{RecordingSearch, ReplaySearch, SearchFixtures, SearchProvider, SearchProviderConfig, SerperClient};

pub const DEFAULT_OPENAI_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Error)]
pub enum SetupError {
    #[error("{0} is not set; export it or use --mode replay with recorded fixtures")]
    MissingCredential(&'static str),
    #[error("{mode:?} mode needs a fixtures directory (--fixtures DIR)")]
    MissingFixtures { mode: Mode },
    #[error("fixtures directory {0} does not exist")]
    FixturesNotFound(PathBuf),
    #[error("{0}")]
    Gateway(String),
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub mode: Mode,
    pub fixtures: Option<PathBuf>,
    pub openai_base_url: String,
    pub openai_api_key: Option<String>,
    pub serper_api_key: Option<String>,
    pub search_endpoint: Option<String>,
    /// Zero disables client-side throttling.
    pub search_requests_per_second: f64,
    pub user_agent: String,
}

impl GatewayConfig {
    pub fn new(mode: Mode, fixtures: Option<PathBuf>) -> Self {
        Self {
            mode,
            fixtures,
            openai_base_url: DEFAULT_OPENAI_BASE_URL.to_string(),
            openai_api_key: None,
            serper_api_key: None,
            search_endpoint: None,
            search_requests_per_second: 5.0,
            user_agent: DEFAULT_USER_AGENT.to_string(),
        }
    }

    pub fn from_env(mode: Mode, fixtures: Option<PathBuf>) -> Self {
        let var = |name| std::env::var(name).ok().filter(|v: &String| !v.trim().is_empty());
        let mut cfg = Self::new(mode, fixtures);
        if let Some(url) = var("OPENAI_BASE_URL") {
            cfg.openai_base_url = url;
        }
        cfg.openai_api_key = var("OPENAI_API_KEY");
        cfg.serper_api_key = var("SERPER_API_KEY");
        cfg
    }
}

pub struct Gateways {
    pub llm: Arc<dyn ChatBackend>,
    pub search: Arc<dyn SearchProvider>,
    pub pages: Arc<dyn DocumentSource>,
}

fn fixture_dirs(root: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (root.join("llm"), root.join("search"), root.join("pages"))
}

impl Gateways {
    /// Builds gateways over a real HTTP client.
    pub fn build(config: &GatewayConfig) -> Result<Self, SetupError> {
        let transport: Arc<dyn HttpTransport> = match config.mode {
            Mode::Replay => Arc::new(crate::testkit::FakeTransport::forbidden()),
            _ => Arc::new(ReqwestTransport::new(&config.user_agent).map_err(|e| SetupError::Gateway(e.to_string()))?),
        };
        Self::with_transport(config, transport)
    }

    /// Builds gateways over `transport`, which is only used in live and record
    /// modes.
    pub fn with_transport(config: &GatewayConfig, transport: Arc<dyn HttpTransport>) -> Result<Self, SetupError> {
        let fixtures = match (config.mode, &config.fixtures) {
            (Mode::Live, _) => None,
            (mode, None) => return Err(SetupError::MissingFixtures { mode }),
            (Mode::Replay, Some(dir)) if !dir.is_dir() => return Err(SetupError::FixturesNotFound(dir.clone())),
            (_, Some(dir)) => Some(fixture_dirs(dir)),
        };
        let reader_config = ReaderConfig { user_agent: config.user_agent.clone(), ..ReaderConfig::default() };

        if let (Mode::Replay, Some((llm_dir, search_dir, pages_dir))) = (config.mode, &fixtures) {
            return Ok(Self {
                llm: Arc::new(ReplayChat::new(FixtureStore::new(llm_dir))),
                search: Arc::new(ReplaySearch::new(SearchFixtures::new(search_dir))),
                pages: Arc::new(PageReader::new(Arc::new(CassetteTransport::replaying(pages_dir)), reader_config)),
            });
        }

        let openai_key = config.openai_api_key.clone().ok_or(SetupError::MissingCredential("OPENAI_API_KEY"))?;
        let serper_key = config.serper_api_key.clone().ok_or(SetupError::MissingCredential("SERPER_API_KEY"))?;
        let chat = OpenAiChat::new(config.openai_base_url.clone(), Some(openai_key), transport.clone());
        let mut search_config = SearchProviderConfig::new(serper_key);
        search_config.requests_per_second = config.search_requests_per_second;
        if let Some(endpoint) = &config.search_endpoint {
            search_config.endpoint = endpoint.clone();
        }
        let serper = SerperClient::new(search_config, transport.clone()).map_err(|e| SetupError::Gateway(e.to_string()))?;

        Ok(match fixtures {
            None => Self {
                llm: Arc::new(chat),
                search: Arc::new(serper),
                pages: Arc::new(PageReader::new(transport, reader_config)),
            },
            Some((llm_dir, search_dir, pages_dir)) => Self {
                llm: Arc::new(RecordingChat::new(Arc::new(chat), FixtureStore::new(llm_dir))),
                search: Arc::new(RecordingSearch::new(serper, SearchFixtures::new(search_dir))),
                pages: Arc::new(PageReader::new(Arc::new(CassetteTransport::recording(pages_dir, transport)), reader_config)),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn live_mode_requires_credentials() {
        let cfg = GatewayConfig::new(Mode::Live, None);
        let err = Gateways::with_transport(&cfg, Arc::new(crate::testkit::FakeTransport::forbidden())).err().unwrap();
        assert!(matches!(err, SetupError::MissingCredential("OPENAI_API_KEY")));
    }

    #[test]
    fn fixture_modes_need_a_directory() {
        let err = Gateways::build(&GatewayConfig::new(Mode::Replay, None)).err().unwrap();
        assert!(matches!(err, SetupError::MissingFixtures { mode: Mode::Replay }));
        let missing = GatewayConfig::new(Mode::Replay, Some(PathBuf::from("/nonexistent/fixtures")));
        assert!(matches!(Gateways::build(&missing).err().unwrap(), SetupError::FixturesNotFound(_)));
    }

    #[test]
    fn replay_builds_without_credentials() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Gateways::build(&GatewayConfig::new(Mode::Replay, Some(dir.path().to_path_buf()))).is_ok());
    }
}
