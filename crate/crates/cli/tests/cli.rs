use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emulate_core::testkit::web::{demo_dataset_jsonl, record_demo_fixtures};
use emulate_core::trace::{Event, RunTrace};
use emulate_core::AgentKind;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo")
}

fn emulate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emulate"))
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .env_remove("SERPER_API_KEY")
        .env_remove("EMULATE_MODE")
        .env_remove("EMULATE_FIXTURES")
        .output()
        .expect("binary runs")
}

fn replay(args: &[&str]) -> Output {
    let dir = fixtures();
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--mode", "replay", "--fixtures", dir.to_str().unwrap()]);
    emulate(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_trace(path: &Path) -> RunTrace {
    RunTrace::read_jsonl(std::io::BufReader::new(fs::File::open(path).unwrap())).unwrap()
}

#[test]
fn verify_prints_recorded_verdict() {
    let out = replay(&["verify", "Paris is the capital of France"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("True"));
    assert!(text.contains("terminated by: sufficient evidence"));
    assert!(text.contains("https://encyclopedia.example.org/wiki/Paris"));
}

#[test]
fn verify_json_output() {
    let out = replay(&["verify", "The Eiffel Tower is located in Berlin", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "False");
    assert_eq!(v["terminated_by"], "SufficientEvidence");
    assert_eq!(v["evidence"].as_array().unwrap().len(), 1);
}

#[test]
fn empty_claim_is_a_usage_error() {
    let out = emulate(&["verify", ""]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("must not be empty"));
    assert_eq!(emulate(&["verify"]).status.code(), Some(1));
    assert_eq!(emulate(&["verify", "x", "--ablate", "rm-everything"]).status.code(), Some(1));
    assert_eq!(emulate(&["verify", "x", "--max-queries", "0"]).status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let out = emulate(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("bench"));
}

#[test]
fn max_queries_flag_limits_search_calls() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let out = replay(&["verify", "Mount Everest is the highest mountain above sea level", "--max-queries", "1", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let t = read_trace(&trace);
    assert!(t.count("SearchCall") <= 1);
    assert!(t.is_complete());
}

#[test]
fn missing_credentials_are_a_config_error() {
    let out = emulate(&["verify", "Paris is the capital of France"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("OPENAI_API_KEY"));
    let out = emulate(&["verify", "x", "--mode", "replay", "--fixtures", "/nonexistent/dir"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unrecorded_claim_in_replay_is_a_gateway_failure() {
    let out = replay(&["verify", "Sharks are mammals"]);
    assert_eq!(out.status.code(), Some(2));
}

fn bench(extra: &[&str], out_dir: &Path) -> Output {
    let data = fixtures().join("claims.jsonl");
    let mut args = vec!["bench", "factool-kbqa", data.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
    args.extend(extra);
    replay(&args)
}

#[test]
fn bench_report_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(&["--concurrency", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let got = fs::read_to_string(dir.path().join("report.json")).unwrap();
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/bench_report.json")).unwrap();
    assert_eq!(got, golden);
    let v: serde_json::Value = serde_json::from_str(&got).unwrap();
    for class in ["True", "False"] {
        assert_eq!(v["metrics"][class]["f1"], 1.0);
    }
    assert_eq!(v["row"], serde_json::json!(["1.0", "1.0", "1.0", "1.0", "1.0", "1.0", "1.0", "1.0"]));
    let predictions = fs::read_to_string(dir.path().join("predictions.jsonl")).unwrap();
    assert_eq!(predictions.lines().count(), 5);
    assert!(stdout(&out).contains("M-F1"));
}

#[test]
fn bench_rm_sr_sends_no_ranking_prompts() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(&["--ablate", "rm-sr", "--trace"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let traces: Vec<_> = fs::read_dir(dir.path().join("traces")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(traces.len(), 5);
    for path in traces {
        let t = read_trace(&path);
        assert_eq!(t.agent_calls(AgentKind::SearchRank), 0);
        assert!(t.agent_calls(AgentKind::Classifier) == 1);
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["method"], "RM-SR");
}

#[test]
fn bench_rm_scc_never_defers() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(&["--ablate", "rm-scc", "--trace", "--limit", "3"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let traces: Vec<_> = fs::read_dir(dir.path().join("traces")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(traces.len(), 3);
    for path in traces {
        let t = read_trace(&path);
        assert_eq!(t.agent_calls(AgentKind::SelfContainedCheck), 0);
        assert!(!t.events().iter().any(|e| matches!(e.event, Event::Deferred { .. })));
    }
}

#[test]
fn bench_with_every_claim_failing_exits_partial() {
    let dir = tempfile::tempdir().unwrap();
    let out = bench(&["--model", "unrecorded-model"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["errored"], 5);
    assert!(report["metrics"].is_null());
}

#[test]
fn bench_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = emulate(&["bench", "fever", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let out = emulate(&["bench", "bingcheck", "/no/such/file.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    // five claims cannot fill the standard BingCheck split
    let data = dir.path().join("b.jsonl");
    fs::write(&data, "{\"claim\": \"a\", \"label\": \"supported\"}\n").unwrap();
    let out = emulate(&["bench", "bingcheck", data.to_str().unwrap(), "--mode", "replay", "--fixtures", "."]);
    assert_eq!(out.status.code(), Some(1));
}

fn snapshot(dir: &Path) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    for sub in ["llm", "search", "pages"] {
        for entry in fs::read_dir(dir.join(sub)).unwrap() {
            let path = entry.unwrap().path();
            files.insert(format!("{sub}/{}", path.file_name().unwrap().to_string_lossy()), fs::read_to_string(&path).unwrap());
        }
    }
    files
}

#[test]
fn shipped_fixtures_are_current() {
    let dir = tempfile::tempdir().unwrap();
    record_demo_fixtures(dir.path()).unwrap();
    assert_eq!(snapshot(dir.path()), snapshot(&fixtures()), "rerun the record_demo example");
    assert_eq!(fs::read_to_string(fixtures().join("claims.jsonl")).unwrap(), demo_dataset_jsonl());
}
