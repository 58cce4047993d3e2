//! The seven LLM agents. Each renders its prompt, calls the chat gateway once
//! (the classifier may re-ask once) and parses the reply, falling back to a
//! conservative value when the reply is unusable.

mod parse;
mod prompts;

use std::collections::HashSet;

pub use parse::{
    parse_helpfulness, parse_list, parse_permutation, parse_verdict, parse_yes_no, HelpfulnessJudgment,
    KEYWORD_WINDOW,
};
pub use prompts::{AgentKind, AgentPrompt, PromptError, PromptSet, Slot, SlotValues, PROMPT_VERSION};

use crate::llm::{ChatBackend, ChatRequest, LlmError, Message};
use crate::model::{BudgetConfig, Claim, Document, EvidenceSet, QueryOrigin, SearchQuery, SearchResultMeta, Verdict};
use crate::trace::{AgentOutcome, Event, RunTrace};

/// Default character budget for the rendered evidence block.
pub const DEFAULT_EVIDENCE_CHARS: usize = 6_000;

const STRICT_VERDICT: &str = "Your previous answer could not be read. Reply with exactly one word: True or False.";

pub fn render_results(results: &[SearchResultMeta]) -> String {
    results
        .iter()
        .enumerate()
        .map(|(i, r)| format!("[{}] {}\nURL: {}\nSnippet: {}", i + 1, r.title, r.url, r.snippet))
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn render_document(doc: &Document) -> String {
    format!("Title: {}\nURL: {}\n\n{}", doc.meta.title, doc.meta.url, doc.body)
}

pub struct Agents<'a> {
    llm: &'a dyn ChatBackend,
    prompts: &'a PromptSet,
    config: &'a BudgetConfig,
    evidence_chars: usize,
}

impl<'a> Agents<'a> {
    pub fn new(llm: &'a dyn ChatBackend, prompts: &'a PromptSet, config: &'a BudgetConfig) -> Self {
        Self { llm, prompts, config, evidence_chars: DEFAULT_EVIDENCE_CHARS }
    }

    pub fn with_evidence_chars(mut self, chars: usize) -> Self {
        self.evidence_chars = chars.max(1);
        self
    }

    fn request(&self, agent: AgentKind, values: &SlotValues<'_>) -> ChatRequest {
        self.prompts.get(agent).request(values, &self.config.model_id, self.config.temperature)
    }

    fn ask(&self, request: &ChatRequest) -> Result<String, LlmError> {
        Ok(self.llm.complete(request)?.text)
    }

    fn log(trace: &mut RunTrace, agent: AgentKind, outcome: AgentOutcome, reply: Option<String>, result: String) {
        if matches!(outcome, AgentOutcome::Fallback | AgentOutcome::ForcedDefault) {
            log::info!("{agent}: unparseable reply, using fallback ({result})");
        }
        trace.push(Event::AgentCall { agent, outcome, reply, result });
    }

    fn evidence_block(&self, evidence: &EvidenceSet) -> String {
        evidence.render(self.evidence_chars)
    }

    pub fn initial_query_gen(&self, claim: &Claim, trace: &mut RunTrace) -> Result<Vec<SearchQuery>, LlmError> {
        let cap = self.config.max_search_queries;
        let req = self.request(
            AgentKind::InitialQueryGen,
            &SlotValues { claim: Some(&claim.text), limit: Some(cap), ..Default::default() },
        );
        let reply = self.ask(&req)?;
        let (queries, outcome) = match parse_list(&reply) {
            Some(items) => (dedupe_queries(items, &HashSet::new(), cap, QueryOrigin::Initial), AgentOutcome::Parsed),
            None => (Vec::new(), AgentOutcome::Fallback),
        };
        let queries = if queries.is_empty() {
            vec![SearchQuery::new(claim.text.trim(), QueryOrigin::Initial).expect("claim text is non-empty")]
        } else {
            queries
        };
        let summary = queries.iter().map(|q| q.text.as_str()).collect::<Vec<_>>().join(" | ");
        Self::log(trace, AgentKind::InitialQueryGen, outcome, Some(reply), summary);
        Ok(queries)
    }

    /// Returns `results` reordered best-first. Always a permutation of the input.
    pub fn search_rank(
        &self,
        claim: &Claim,
        query: &SearchQuery,
        results: Vec<SearchResultMeta>,
        trace: &mut RunTrace,
    ) -> Result<Vec<SearchResultMeta>, LlmError> {
        if results.len() <= 1 {
            return Ok(results);
        }
        let listing = render_results(&results);
        let req = self.request(
            AgentKind::SearchRank,
            &SlotValues { claim: Some(&claim.text), query: Some(&query.text), results: Some(&listing), ..Default::default() },
        );
        let reply = self.ask(&req)?;
        let (order, outcome) = match parse_permutation(&reply, results.len()) {
            Some(order) => (order, AgentOutcome::Parsed),
            None => ((0..results.len()).collect(), AgentOutcome::Fallback),
        };
        let summary = format!("{:?}", order.iter().map(|i| i + 1).collect::<Vec<_>>());
        Self::log(trace, AgentKind::SearchRank, outcome, Some(reply), summary);
        let mut slots: Vec<Option<SearchResultMeta>> = results.into_iter().map(Some).collect();
        Ok(order.into_iter().map(|i| slots[i].take().expect("permutation")).collect())
    }

    pub fn self_contained_check(
        &self,
        claim: &Claim,
        evidence: &EvidenceSet,
        doc: &Document,
        trace: &mut RunTrace,
    ) -> Result<bool, LlmError> {
        let ev = self.evidence_block(evidence);
        let body = render_document(doc);
        let req = self.request(
            AgentKind::SelfContainedCheck,
            &SlotValues { claim: Some(&claim.text), evidence: Some(&ev), document: Some(&body), ..Default::default() },
        );
        let reply = self.ask(&req)?;
        let (answer, outcome) = match parse_yes_no(&reply) {
            Some(b) => (b, AgentOutcome::Parsed),
            None => (false, AgentOutcome::Fallback),
        };
        Self::log(trace, AgentKind::SelfContainedCheck, outcome, Some(reply), answer.to_string());
        Ok(answer)
    }

    pub fn det_helpful(
        &self,
        claim: &Claim,
        evidence: &EvidenceSet,
        doc: &Document,
        trace: &mut RunTrace,
    ) -> Result<HelpfulnessJudgment, LlmError> {
        let ev = self.evidence_block(evidence);
        let body = render_document(doc);
        let req = self.request(
            AgentKind::DetHelpful,
            &SlotValues { claim: Some(&claim.text), evidence: Some(&ev), document: Some(&body), ..Default::default() },
        );
        let reply = self.ask(&req)?;
        let (judgment, outcome) = match parse_helpfulness(&reply) {
            Some(j) => (j, AgentOutcome::Parsed),
            None => (HelpfulnessJudgment::not_helpful(), AgentOutcome::Fallback),
        };
        Self::log(trace, AgentKind::DetHelpful, outcome, Some(reply), judgment.helpful.to_string());
        Ok(judgment)
    }

    pub fn sufficient_evidence(
        &self,
        claim: &Claim,
        evidence: &EvidenceSet,
        trace: &mut RunTrace,
    ) -> Result<bool, LlmError> {
        if evidence.is_empty() {
            Self::log(trace, AgentKind::SufficientEvidence, AgentOutcome::ShortCircuit, None, "false".into());
            return Ok(false);
        }
        let ev = self.evidence_block(evidence);
        let req = self.request(
            AgentKind::SufficientEvidence,
            &SlotValues { claim: Some(&claim.text), evidence: Some(&ev), ..Default::default() },
        );
        let reply = self.ask(&req)?;
        let (answer, outcome) = match parse_yes_no(&reply) {
            Some(b) => (b, AgentOutcome::Parsed),
            None => (false, AgentOutcome::Fallback),
        };
        Self::log(trace, AgentKind::SufficientEvidence, outcome, Some(reply), answer.to_string());
        Ok(answer)
    }

    pub fn classify(&self, claim: &Claim, evidence: &EvidenceSet, trace: &mut RunTrace) -> Result<Verdict, LlmError> {
        let ev = self.evidence_block(evidence);
        let mut req = self.request(
            AgentKind::Classifier,
            &SlotValues { claim: Some(&claim.text), evidence: Some(&ev), ..Default::default() },
        );
        let reply = self.ask(&req)?;
        if let Some(v) = parse_verdict(&reply) {
            Self::log(trace, AgentKind::Classifier, AgentOutcome::Parsed, Some(reply), v.to_string());
            return Ok(v);
        }
        req.messages.push(Message::user(format!("Previous answer: {}\n\n{STRICT_VERDICT}", reply.trim())));
        let retry = self.ask(&req)?;
        match parse_verdict(&retry) {
            Some(v) => {
                Self::log(trace, AgentKind::Classifier, AgentOutcome::Retried, Some(format!("{reply}\n---\n{retry}")), v.to_string());
                Ok(v)
            }
            None => {
                Self::log(
                    trace,
                    AgentKind::Classifier,
                    AgentOutcome::ForcedDefault,
                    Some(format!("{reply}\n---\n{retry}")),
                    Verdict::False.to_string(),
                );
                Ok(Verdict::False)
            }
        }
    }

    /// New queries not already in `issued` (compared case-insensitively),
    /// at most `remaining` of them.
    pub fn additional_query_gen(
        &self,
        claim: &Claim,
        evidence: &EvidenceSet,
        issued: &HashSet<String>,
        remaining: usize,
        trace: &mut RunTrace,
    ) -> Result<Vec<SearchQuery>, LlmError> {
        if remaining == 0 {
            return Ok(Vec::new());
        }
        let ev = self.evidence_block(evidence);
        let req = self.request(
            AgentKind::AdditionalQueryGen,
            &SlotValues { claim: Some(&claim.text), evidence: Some(&ev), limit: Some(remaining), ..Default::default() },
        );
        let reply = self.ask(&req)?;
        let (queries, outcome) = match parse_list(&reply) {
            Some(items) => (dedupe_queries(items, issued, remaining, QueryOrigin::Additional), AgentOutcome::Parsed),
            None => (Vec::new(), AgentOutcome::Fallback),
        };
        let summary = queries.iter().map(|q| q.text.as_str()).collect::<Vec<_>>().join(" | ");
        Self::log(trace, AgentKind::AdditionalQueryGen, outcome, Some(reply), summary);
        Ok(queries)
    }
}

/// Lowercased form used to compare query texts.
pub fn query_key(text: &str) -> String {
    text.trim().to_lowercase()
}

fn dedupe_queries(items: Vec<String>, issued: &HashSet<String>, cap: usize, origin: QueryOrigin) -> Vec<SearchQuery> {
    let mut seen: HashSet<String> = HashSet::new();
    items
        .into_iter()
        .filter_map(|text| SearchQuery::new(text, origin).ok())
        .filter(|q| {
            let key = query_key(&q.text);
            !issued.contains(&key) && seen.insert(key)
        })
        .take(cap)
        .collect()
}
