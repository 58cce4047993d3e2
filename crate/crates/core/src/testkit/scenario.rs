//! Randomized scripted worlds and the run invariants checked against them.

use std::collections::HashSet;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{document_url, Hit, ScriptedLlm, StaticPages, StaticSearch};
use crate::agents::{query_key, AgentKind, PromptSet};
use crate::model::{BudgetConfig, Claim};
use crate::pipeline::{Ablations, PipelineError, VerdictReport, Verifier};
use crate::search::SearchError;
use crate::trace::{Decision, Event, Phase, TerminatedBy};

const URL_POOL: usize = 8;

fn pool_url(i: usize) -> String {
    format!("https://site{i}.example.org/page")
}

const GIBBERISH: [&str; 5] = ["qwerty asdf", "", "I'm not sure how to answer that.", "}}{{", "maybe? it depends"];

fn gibberish(rng: &mut ChaCha8Rng) -> String {
    GIBBERISH[rng.random_range(0..GIBBERISH.len())].to_string()
}

fn query_list(rng: &mut ChaCha8Rng, n: usize) -> String {
    (0..n)
        .map(|i| format!("{}. topic {} detail {}", i + 1, rng.random_range(0..6), rng.random_range(0..3)))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Picks a reply for `agent`, mixing well-formed, degenerate and hostile answers.
fn random_reply(rng: &mut ChaCha8Rng, agent: AgentKind, results_listed: usize) -> String {
    let roll = rng.random_range(0..100);
    if roll < 12 {
        return gibberish(rng);
    }
    match agent {
        AgentKind::InitialQueryGen | AgentKind::AdditionalQueryGen => {
            let n = rng.random_range(1..9);
            query_list(rng, n)
        }
        AgentKind::SearchRank => {
            let n = results_listed.max(1);
            let mut order: Vec<usize> = (1..=n).collect();
            order.shuffle(rng);
            if roll < 25 {
                order.push(n + 1);
            }
            format!("{order:?}")
        }
        AgentKind::SelfContainedCheck => if roll < 70 { "YES" } else { "NO, it refers to an earlier post" }.into(),
        AgentKind::DetHelpful => match roll {
            0..=45 => format!("HELPFUL: fact number {}", rng.random_range(0..20)),
            46..=55 => "HELPFUL:".into(),
            _ => "NOT HELPFUL".into(),
        },
        AgentKind::SufficientEvidence => if roll < 30 { "YES" } else { "NO" }.into(),
        AgentKind::Classifier => if roll < 55 { "True" } else { "False, the date is wrong" }.into(),
    }
}

/// A self-contained fake world for one verification run.
pub struct Scenario {
    pub seed: u64,
    pub config: BudgetConfig,
    pub ablations: Ablations,
    pub llm: Arc<ScriptedLlm>,
    pub search: Arc<StaticSearch>,
    pub pages: Arc<StaticPages>,
    pub prompts: Arc<PromptSet>,
}

impl Scenario {
    /// Budget, ablations, replies, search hits and pages all drawn from `seed`.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = BudgetConfig {
            max_search_queries: rng.random_range(1..=6),
            max_results_per_query: rng.random_range(1..=4),
            ..BudgetConfig::default()
        };
        let ablations = Ablations { rm_sr: rng.random_bool(0.25), rm_scc: rng.random_bool(0.25) };
        let prompts = Arc::new(PromptSet::bundled());

        let llm_rng = Mutex::new(ChaCha8Rng::seed_from_u64(rng.random()));
        let llm = ScriptedLlm::new(prompts.clone(), move |agent, req| {
            let listed = super::user_text(req).matches("\nURL: ").count();
            random_reply(&mut llm_rng.lock().unwrap(), agent, listed)
        });

        let search_rng = Mutex::new(ChaCha8Rng::seed_from_u64(rng.random()));
        let search = StaticSearch::new(move |_query| {
            let mut rng = search_rng.lock().unwrap();
            if rng.random_bool(0.08) {
                return Err(SearchError::Transport("connection reset".into()));
            }
            let n = rng.random_range(0..=5);
            Ok((0..n)
                .map(|_| {
                    let i = rng.random_range(0..URL_POOL);
                    let snippet = if i % 4 == 3 { "" } else { "a short snippet" };
                    Hit::new(&format!("Page {i}"), &pool_url(i), snippet)
                })
                .collect())
        });

        let pages = StaticPages::new(|url| {
            let i: usize = url.trim_start_matches("https://site").split('.').next()?.parse().ok()?;
            i.is_multiple_of(2).then(|| format!("Full text of page {i}, long enough to read as an article."))
        });

        Self {
            seed,
            config,
            ablations,
            llm: Arc::new(llm),
            search: Arc::new(search),
            pages: Arc::new(pages),
            prompts,
        }
    }

    pub fn verifier(&self) -> Verifier {
        Verifier::new(self.llm.clone(), self.search.clone(), self.pages.clone(), self.prompts.clone(), self.config.clone())
            .expect("valid config")
            .with_ablations(self.ablations.clone())
    }

    pub fn run(&self) -> Result<VerdictReport, PipelineError> {
        let claim = Claim::new(format!("claim-{}", self.seed), "The bridge opened in 1932.").expect("claim");
        self.verifier().verify(&claim)
    }

    /// Upper bound on LLM calls: one initial generation, per query one ranking
    /// and one follow-up generation, three calls per result, three per deferred
    /// document, and two for the classifier.
    pub fn call_bound(&self, deferred: usize) -> usize {
        let q = self.config.max_search_queries;
        let k = self.config.max_results_per_query;
        1 + 2 * q + 3 * q * k + 3 * deferred + 2
    }

    /// Checks every run-level invariant, returning the first violation.
    pub fn check(&self, report: &VerdictReport) -> Result<(), String> {
        let trace = &report.trace;
        let events: Vec<&Event> = trace.events().iter().map(|e| &e.event).collect();
        let q = self.config.max_search_queries;
        let k = self.config.max_results_per_query;
        let fail = |msg: String| Err(format!("seed {}: {msg}", self.seed));

        let searches = self.search.calls();
        if searches.len() > q {
            return fail(format!("{} search calls over a budget of {q}", searches.len()));
        }
        if let Some((_, got)) = searches.iter().find(|(_, got)| *got != k) {
            return fail(format!("search requested {got} results instead of {k}"));
        }
        let issued: Vec<String> = events
            .iter()
            .filter_map(|e| match e {
                Event::SearchCall { query, .. } => Some(query_key(query)),
                _ => None,
            })
            .collect();
        if issued.len() != searches.len() || issued.iter().collect::<HashSet<_>>().len() != issued.len() {
            return fail("issued query texts are not one per search call".into());
        }

        if trace.count("Verdict") != 1 || !trace.is_complete() {
            return fail("trace must end with exactly one verdict".into());
        }
        if trace.agent_calls(AgentKind::Classifier) != 1 || !(1..=2).contains(&self.llm.count(AgentKind::Classifier)) {
            return fail("classifier must run exactly once".into());
        }
        if self.ablations.rm_sr && self.llm.count(AgentKind::SearchRank) > 0 {
            return fail("ranking agent called under rm-sr".into());
        }
        if self.ablations.rm_scc && (self.llm.count(AgentKind::SelfContainedCheck) > 0 || trace.count("Deferred") > 0) {
            return fail("comprehensibility agent or deferral under rm-scc".into());
        }

        let deferred: Vec<&str> = events
            .iter()
            .filter_map(|e| match e {
                Event::Deferred { url, .. } => Some(url.as_str()),
                _ => None,
            })
            .collect();
        let drained: Vec<&str> = events
            .iter()
            .filter_map(|e| match e {
                Event::ScenarioDecision { url: Some(url), phase: Phase::Drain, .. } => Some(url.as_str()),
                _ => None,
            })
            .collect();
        if drained.len() > deferred.len() || drained[..] != deferred[..drained.len()] {
            return fail(format!("drain order {drained:?} does not follow deferral order {deferred:?}"));
        }
        let stopped_early = events.iter().any(|e| {
            matches!(e, Event::ScenarioDecision { decision: Decision::Sufficient, phase: Phase::Drain, .. })
        });
        let sufficient_in_loop = events.iter().any(|e| {
            matches!(e, Event::ScenarioDecision { decision: Decision::Sufficient, phase: Phase::Loop, .. })
        });
        if !stopped_early && !sufficient_in_loop && drained.len() != deferred.len() {
            return fail("deferred documents skipped by the drain".into());
        }
        let checks = self.llm.calls();
        for url in &deferred {
            let looks = checks
                .iter()
                .filter(|(a, r)| *a == AgentKind::SelfContainedCheck && document_url(r) == Some(*url))
                .count();
            if looks > 2 {
                return fail(format!("{url} checked {looks} times"));
            }
        }

        let total = self.llm.total();
        let bound = self.call_bound(deferred.len());
        if total > bound {
            return fail(format!("{total} LLM calls over the bound {bound}"));
        }

        if report.terminated_by == TerminatedBy::SufficientEvidence {
            let last = events.iter().rev().find_map(|e| match e {
                Event::AgentCall { agent: AgentKind::SufficientEvidence, result, .. } => Some(result.as_str()),
                _ => None,
            });
            if last != Some("true") {
                return fail("sufficient termination without a positive sufficiency call".into());
            }
        }
        if report.evidence.len() != trace.count("EvidenceAdded") {
            return fail("evidence set and trace disagree".into());
        }
        Ok(())
    }
}
