use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use emulate_core::agents::PromptSet;
use emulate_core::http::{HttpTransport, Mode, ReqwestTransport, RetryPolicy};
use emulate_core::llm::{ChatBackend, ChatRequest, Message, OpenAiChat};
use emulate_core::model::{BudgetConfig, Claim, QueryOrigin, SearchQuery, SearchResultMeta};
use emulate_core::pipeline::{PipelineError, Verifier};
use emulate_core::reader::{DocumentSource, PageReader, ReaderConfig};
use emulate_core::setup::Gateways;
use emulate_core::testkit::web::{demo_claims, demo_web, fake_gateway_config, record_demo_fixtures, DEMO_FACTS};
use emulate_core::model::Acquisition;

fn replay_verifier(dir: &std::path::Path, config: BudgetConfig) -> Verifier {
    let gw = Gateways::build(&fake_gateway_config(Mode::Replay, dir)).unwrap();
    Verifier::new(gw.llm, gw.search, gw.pages, Arc::new(PromptSet::bundled()), config).unwrap()
}

#[test]
fn replay_matches_recording_without_network() {
    let dir = tempfile::tempdir().unwrap();
    let recorded = record_demo_fixtures(dir.path()).unwrap();
    let claims = demo_claims();
    for round in 0..2 {
        let v = replay_verifier(dir.path(), BudgetConfig::default());
        for (claim, rec) in claims.iter().zip(&recorded) {
            let got = v.verify(claim).unwrap();
            assert_eq!(got.verdict, rec.verdict, "round {round}");
            assert_eq!(got.trace.normalized(), rec.trace.normalized(), "round {round}");
        }
    }
}

#[test]
fn replay_of_unrecorded_request_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    record_demo_fixtures(dir.path()).unwrap();
    let v = replay_verifier(dir.path(), BudgetConfig::default());
    let unknown = Claim::new("x", "Sharks are mammals").unwrap();
    assert!(matches!(v.verify(&unknown), Err(PipelineError::GatewayFatal(_))));
    let other_model = BudgetConfig { model_id: "another-model".into(), ..BudgetConfig::default() };
    let v = replay_verifier(dir.path(), other_model);
    assert!(v.verify(&demo_claims()[0]).is_err());
}

#[test]
fn recording_touches_the_network_once_per_request() {
    let dir = tempfile::tempdir().unwrap();
    let transport = Arc::new(demo_web(Arc::new(PromptSet::bundled())));
    let gw = Gateways::with_transport(&fake_gateway_config(Mode::Record, dir.path()), transport.clone()).unwrap();
    let v = Verifier::new(gw.llm, gw.search, gw.pages, Arc::new(PromptSet::bundled()), BudgetConfig::default()).unwrap();
    let report = v.verify(&demo_claims()[0]).unwrap();
    // chat calls + one search + robots and page for the fact page
    let chats = report.trace.count("AgentCall");
    assert_eq!(transport.call_count(), chats + 1 + 2);
    assert_eq!(report.evidence.items()[0].note, DEMO_FACTS[0].text);
}

/// Serves canned HTTP/1.1 responses on a local port. `route` maps a request
/// line and body to (status, content type, body).
fn serve(route: impl Fn(&str, &str) -> (u16, &'static str, String) + Send + Sync + 'static) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            counter.fetch_add(1, Ordering::SeqCst);
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let (status, ctype, out) = route(request_line.trim(), &String::from_utf8_lossy(&body));
            let resp = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: {ctype}\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{out}",
                out.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}"), hits)
}

#[test]
fn chat_client_retries_server_errors_over_real_http() {
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    let (base, _) = serve(move |line, body| {
        assert!(line.starts_with("POST /v1/chat/completions"));
        assert!(body.contains("\"temperature\":1.0"));
        if seen.fetch_add(1, Ordering::SeqCst) == 0 {
            return (503, "text/plain", "busy".into());
        }
        (200, "application/json", r#"{"choices":[{"message":{"content":"True"}}]}"#.into())
    });
    let transport: Arc<dyn HttpTransport> = Arc::new(ReqwestTransport::new("test-agent").unwrap());
    let chat = OpenAiChat::new(format!("{base}/v1"), Some("k".into()), transport).with_retry(RetryPolicy::immediate(3));
    let req = ChatRequest {
        model_id: "m".into(),
        messages: vec![Message::system("s"), Message::user("u")],
        temperature: 1.0,
    };
    assert_eq!(chat.complete(&req).unwrap().text, "True");
    assert_eq!(calls.load(Ordering::SeqCst), 2);
}

#[test]
fn page_reader_extracts_article_over_real_http() {
    let (base, hits) = serve(|line, _| match line {
        l if l.starts_with("GET /robots.txt") => (200, "text/plain", "User-agent: *\nDisallow: /private\n".into()),
        l if l.starts_with("GET /article") => (
            200,
            "text/html",
            "<html><body><nav>menu</nav><article><p>The bridge opened to traffic on 19 March 1932 after eight years of work.</p></article></body></html>".into(),
        ),
        _ => (404, "text/plain", "missing".into()),
    });
    let reader = PageReader::new(Arc::new(ReqwestTransport::new("test-agent").unwrap()), ReaderConfig::default());
    let q = SearchQuery::new("q", QueryOrigin::Initial).unwrap();
    let doc = reader.acquire(&SearchResultMeta::new("Bridge", format!("{base}/article"), "snip", q.clone()).unwrap()).unwrap();
    assert_eq!(doc.acquisition, Acquisition::FetchedPage);
    assert_eq!(doc.body, "The bridge opened to traffic on 19 March 1932 after eight years of work.");

    let blocked = reader.acquire(&SearchResultMeta::new("Secret", format!("{base}/private/x"), "the snippet", q).unwrap()).unwrap();
    assert!(matches!(blocked.acquisition, Acquisition::SnippetFallback { .. }));
    // robots.txt fetched once per origin, the private page never requested
    assert_eq!(hits.load(Ordering::SeqCst), 2);
}
