//! A fake web behind [`FakeTransport`]: a chat completions endpoint, a search
//! endpoint and a handful of pages, enough to record fixtures offline.

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::json;

use super::{user_text, FakeTransport, Hit};
use crate::agents::{AgentKind, PromptSet};
use crate::http::{HttpRequest, HttpResponse, Method, Mode};
use crate::llm::{ChatRequest, Message};
use crate::model::{BudgetConfig, Claim, Verdict};
use crate::pipeline::{Ablations, PipelineError, VerdictReport, Verifier};
use crate::search::DEFAULT_SEARCH_ENDPOINT;
use crate::setup::{GatewayConfig, Gateways};

pub const FAKE_CHAT_BASE: &str = "https://llm.fake.test/v1";

/// One claim the fake web knows about.
#[derive(Debug, Clone)]
pub struct Fact {
    pub claim: &'static str,
    pub label: Verdict,
    pub url: &'static str,
    pub title: &'static str,
    pub text: &'static str,
}

pub const DEMO_FACTS: [Fact; 5] = [
    Fact {
        claim: "Paris is the capital of France",
        label: Verdict::True,
        url: "https://encyclopedia.example.org/wiki/Paris",
        title: "Paris - Encyclopedia",
        text: "Paris is the capital and largest city of France, seat of the national government.",
    },
    Fact {
        claim: "The Eiffel Tower is located in Berlin",
        label: Verdict::False,
        url: "https://encyclopedia.example.org/wiki/Eiffel_Tower",
        title: "Eiffel Tower - Encyclopedia",
        text: "The Eiffel Tower is a wrought-iron lattice tower on the Champ de Mars in Paris, France.",
    },
    Fact {
        claim: "Water boils at 100 degrees Celsius at sea level",
        label: Verdict::True,
        url: "https://science.example.org/boiling-point",
        title: "Boiling point of water",
        text: "At standard atmospheric pressure, as found at sea level, pure water boils at 100 degrees Celsius.",
    },
    Fact {
        claim: "The Great Wall of China is visible from the Moon with the naked eye",
        label: Verdict::False,
        url: "https://space.example.org/great-wall-myth",
        title: "Can you see the Great Wall from space?",
        text: "Astronauts report that the Great Wall of China cannot be seen from the Moon with the naked eye.",
    },
    Fact {
        claim: "Mount Everest is the highest mountain above sea level",
        label: Verdict::True,
        url: "https://geo.example.org/everest",
        title: "Mount Everest",
        text: "Mount Everest, at 8,849 metres, is the highest mountain on Earth above sea level.",
    },
];

/// A page that never helps, returned next to every fact page.
pub const FILLER_URL: &str = "https://forum.example.net/thread/42";

fn fact_for(text: &str) -> Option<&'static Fact> {
    DEMO_FACTS.iter().find(|f| text.contains(f.claim))
}

fn page_html(title: &str, text: &str) -> String {
    format!(
        "<html><head><title>{title}</title></head><body><nav>Home | About</nav>\
         <article><h1>{title}</h1><p>{text}</p></article><footer>Contact us</footer></body></html>"
    )
}

/// The scripted agent behaviour of the demo world.
pub fn demo_reply(agent: AgentKind, request: &ChatRequest) -> String {
    let text = user_text(request);
    let fact = fact_for(text);
    match agent {
        AgentKind::InitialQueryGen => match fact {
            Some(f) => format!("1. {}\n2. {} facts", f.title, f.claim),
            None => "1. general reference".into(),
        },
        AgentKind::AdditionalQueryGen => match fact {
            Some(f) => format!("1. {} source", f.title),
            None => "nothing more to search".into(),
        },
        AgentKind::SearchRank => "[2, 1]".into(),
        AgentKind::SelfContainedCheck => "YES".into(),
        AgentKind::DetHelpful => match fact {
            Some(f) if super::document_url(request) == Some(f.url) => format!("HELPFUL: {}", f.text),
            _ => "NOT HELPFUL".into(),
        },
        AgentKind::SufficientEvidence => "YES".into(),
        AgentKind::Classifier => fact.map_or(Verdict::False, |f| f.label).to_string(),
    }
}

#[derive(Deserialize)]
struct WireChat {
    model: String,
    temperature: f64,
    messages: Vec<Message>,
}

#[derive(Deserialize)]
struct WireSearch {
    q: String,
    num: usize,
}

/// Builds a transport that serves chat completions from `reply`, search
/// results from `hits` and page bodies from `page`.
pub fn fake_web(
    prompts: Arc<PromptSet>,
    reply: impl Fn(AgentKind, &ChatRequest) -> String + Send + Sync + 'static,
    hits: impl Fn(&str) -> Vec<Hit> + Send + Sync + 'static,
    page: impl Fn(&str) -> Option<String> + Send + Sync + 'static,
) -> FakeTransport {
    FakeTransport::new(move |req: &HttpRequest| {
        let body = req.body.as_deref().unwrap_or_default();
        if req.method == Method::Post && req.url == format!("{FAKE_CHAT_BASE}/chat/completions") {
            let wire: WireChat = serde_json::from_slice(body).expect("chat request body");
            let chat = ChatRequest { model_id: wire.model, messages: wire.messages, temperature: wire.temperature };
            let agent = prompts.identify(&chat).expect("known agent prompt");
            let out = json!({
                "choices": [{"message": {"role": "assistant", "content": reply(agent, &chat)}}],
                "usage": {"prompt_tokens": 100, "completion_tokens": 10},
            });
            return Ok(HttpResponse::new(200, out.to_string()).with_header("content-type", "application/json"));
        }
        if req.method == Method::Post && req.url == DEFAULT_SEARCH_ENDPOINT {
            let wire: WireSearch = serde_json::from_slice(body).expect("search request body");
            let organic: Vec<_> = hits(&wire.q)
                .into_iter()
                .take(wire.num)
                .enumerate()
                .map(|(i, h)| json!({"title": h.title, "link": h.url, "snippet": h.snippet, "position": i + 1}))
                .collect();
            let out = json!({"searchParameters": {"q": wire.q, "num": wire.num}, "organic": organic});
            return Ok(HttpResponse::new(200, out.to_string()).with_header("content-type", "application/json"));
        }
        if req.url.ends_with("/robots.txt") {
            return Ok(HttpResponse::new(404, "not found"));
        }
        match page(&req.url) {
            Some(html) => Ok(HttpResponse::new(200, html).with_header("content-type", "text/html; charset=utf-8")),
            None => Ok(HttpResponse::new(404, "not found").with_header("content-type", "text/plain")),
        }
    })
}

/// The demo world: every query about a known claim returns a filler page
/// followed by the fact page.
pub fn demo_web(prompts: Arc<PromptSet>) -> FakeTransport {
    fake_web(
        prompts,
        demo_reply,
        |query| {
            let fact = DEMO_FACTS.iter().find(|f| query.contains(f.title) || query.contains(f.claim));
            let mut hits = vec![Hit::new("Random discussion", FILLER_URL, "people talk about many things")];
            if let Some(f) = fact {
                hits.push(Hit::new(f.title, f.url, &f.text[..40]));
            }
            hits
        },
        |url| {
            if url == FILLER_URL {
                return Some(page_html("Forum", "Off-topic chatter about weekend plans and the weather in general."));
            }
            DEMO_FACTS.iter().find(|f| f.url == url).map(|f| page_html(f.title, f.text))
        },
    )
}

pub fn demo_claims() -> Vec<Claim> {
    DEMO_FACTS
        .iter()
        .enumerate()
        .map(|(i, f)| Claim::new(format!("demo-{}", i + 1), f.claim).expect("claim").with_gold(f.label))
        .collect()
}

/// Demo claims as dataset JSON lines.
pub fn demo_dataset_jsonl() -> String {
    demo_claims()
        .iter()
        .map(|c| {
            let gold = c.gold_label.expect("gold") == Verdict::True;
            format!("{}\n", json!({"id": c.id, "claim": c.text, "label": gold}))
        })
        .collect()
}

/// Gateway config pointing at the fake web.
pub fn fake_gateway_config(mode: Mode, fixtures: &Path) -> GatewayConfig {
    let mut cfg = GatewayConfig::new(mode, Some(fixtures.to_path_buf()));
    cfg.openai_base_url = FAKE_CHAT_BASE.to_string();
    cfg.openai_api_key = Some("test-key".into());
    cfg.serper_api_key = Some("test-key".into());
    cfg.search_requests_per_second = 0.0;
    cfg
}

/// Records fixtures for `claims` under every budget in `configs`.
pub fn record_fixtures(
    dir: &Path,
    transport: FakeTransport,
    claims: &[Claim],
    configs: &[(BudgetConfig, Ablations)],
) -> Result<Vec<VerdictReport>, PipelineError> {
    let gateways = Gateways::with_transport(&fake_gateway_config(Mode::Record, dir), Arc::new(transport))
        .map_err(|e| PipelineError::GatewayFatal(e.to_string()))?;
    let prompts = Arc::new(PromptSet::bundled());
    let mut reports = Vec::new();
    for (config, ablations) in configs {
        let verifier = Verifier::new(gateways.llm.clone(), gateways.search.clone(), gateways.pages.clone(), prompts.clone(), config.clone())?
            .with_ablations(ablations.clone());
        for claim in claims {
            reports.push(verifier.verify(claim)?);
        }
    }
    Ok(reports)
}

/// Records the demo world for the default budget, a one-query budget and both
/// ablations.
pub fn record_demo_fixtures(dir: &Path) -> Result<Vec<VerdictReport>, PipelineError> {
    let default = BudgetConfig::default();
    let one = BudgetConfig { max_search_queries: 1, ..BudgetConfig::default() };
    let configs = [
        (default.clone(), Ablations::none()),
        (one, Ablations::none()),
        (default.clone(), Ablations { rm_sr: true, rm_scc: false }),
        (default, Ablations { rm_sr: false, rm_scc: true }),
    ];
    let transport = demo_web(Arc::new(PromptSet::bundled()));
    record_fixtures(dir, transport, &demo_claims(), &configs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TerminatedBy;

    #[test]
    fn demo_world_answers_every_claim() {
        let dir = tempfile::tempdir().unwrap();
        let reports = record_demo_fixtures(dir.path()).unwrap();
        assert_eq!(reports.len(), 20);
        for (report, fact) in reports.iter().zip(DEMO_FACTS.iter().cycle()) {
            assert_eq!(report.verdict, fact.label, "{}", fact.claim);
            assert_eq!(report.terminated_by, TerminatedBy::SufficientEvidence);
            assert_eq!(report.evidence.items()[0].source_url, fact.url);
        }
        for sub in ["llm", "search", "pages"] {
            assert!(dir.path().join(sub).read_dir().unwrap().next().is_some());
        }
    }
}
