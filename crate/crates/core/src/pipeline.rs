//! Claim verification loop: search, rank, read each result, sort it into one
//! of four outcomes, revisit deferred pages once at the end, then classify.
//!
//! Per result the outcomes are:
//! - not comprehensible yet: held in the deferred queue;
//! - comprehensible but unhelpful: skipped, move to the next result;
//! - helpful: its note joins the evidence set, then sufficiency is checked;
//! - helpful and now sufficient: classify immediately.

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{query_key, Agents, PromptSet, DEFAULT_EVIDENCE_CHARS};
use crate::llm::{ChatBackend, LlmError};
use crate::model::{
    url_key, BudgetConfig, BudgetLedger, Claim, Document, EvidenceItem, EvidenceSet, Insertion, ModelError,
    SearchQuery, SearchResultMeta, Verdict,
};
use crate::reader::DocumentSource;
use crate::search::SearchProvider;
use crate::trace::{Decision, Event, Phase, RunTrace, TerminatedBy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ablation {
    /// Use provider order instead of the ranking agent.
    #[serde(rename = "rm-sr")]
    RmSr,
    /// Treat every page as comprehensible; nothing is deferred.
    #[serde(rename = "rm-scc")]
    RmScc,
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "rm-sr" => Ok(Ablation::RmSr),
            "rm-scc" => Ok(Ablation::RmScc),
            other => Err(format!("unknown ablation {other:?} (expected rm-sr or rm-scc)")),
        }
    }
}

impl std::fmt::Display for Ablation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ablation::RmSr => "rm-sr",
            Ablation::RmScc => "rm-scc",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablations {
    pub rm_sr: bool,
    pub rm_scc: bool,
}

impl Ablations {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn from_list(list: &[Ablation]) -> Self {
        Self { rm_sr: list.contains(&Ablation::RmSr), rm_scc: list.contains(&Ablation::RmScc) }
    }

    pub fn label(&self) -> &'static str {
        match (self.rm_sr, self.rm_scc) {
            (false, false) => "EMULATE",
            (true, false) => "RM-SR",
            (false, true) => "RM-SCC",
            (true, true) => "RM-SR+RM-SCC",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("gateway failure: {0}")]
    GatewayFatal(String),
    #[error(transparent)]
    Config(#[from] ModelError),
}

impl From<LlmError> for PipelineError {
    fn from(err: LlmError) -> Self {
        PipelineError::GatewayFatal(err.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictReport {
    pub verdict: Verdict,
    pub evidence: EvidenceSet,
    pub trace: RunTrace,
    pub terminated_by: TerminatedBy,
}

/// Mutable state of one run.
#[derive(Debug)]
pub struct PipelineState {
    pub claim: Claim,
    pub evidence: EvidenceSet,
    pub pending_queries: VecDeque<SearchQuery>,
    pub deferred: Vec<Document>,
    pub ledger: BudgetLedger,
    pub issued_query_texts: HashSet<String>,
    pub trace: RunTrace,
    pub ablations: Ablations,
    pub sufficient: bool,
    seen_urls: HashSet<String>,
}

impl PipelineState {
    pub fn new(claim: Claim, config: BudgetConfig, ablations: Ablations) -> Self {
        Self {
            claim,
            evidence: EvidenceSet::new(),
            pending_queries: VecDeque::new(),
            deferred: Vec::new(),
            ledger: BudgetLedger::new(config),
            issued_query_texts: HashSet::new(),
            trace: RunTrace::new(),
            ablations,
            sufficient: false,
            seen_urls: HashSet::new(),
        }
    }
}

/// Runs verifications against shared gateways. Cheap to share across threads.
pub struct Verifier {
    llm: Arc<dyn ChatBackend>,
    search: Arc<dyn SearchProvider>,
    pages: Arc<dyn DocumentSource>,
    prompts: Arc<PromptSet>,
    config: BudgetConfig,
    ablations: Ablations,
    evidence_chars: usize,
}

impl Verifier {
    pub fn new(
        llm: Arc<dyn ChatBackend>,
        search: Arc<dyn SearchProvider>,
        pages: Arc<dyn DocumentSource>,
        prompts: Arc<PromptSet>,
        config: BudgetConfig,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self {
            llm,
            search,
            pages,
            prompts,
            config,
            ablations: Ablations::none(),
            evidence_chars: DEFAULT_EVIDENCE_CHARS,
        })
    }

    pub fn with_ablations(mut self, ablations: Ablations) -> Self {
        self.ablations = ablations;
        self
    }

    pub fn with_evidence_chars(mut self, chars: usize) -> Self {
        self.evidence_chars = chars;
        self
    }

    pub fn config(&self) -> &BudgetConfig {
        &self.config
    }

    pub fn ablations(&self) -> &Ablations {
        &self.ablations
    }

    fn agents(&self) -> Agents<'_> {
        Agents::new(self.llm.as_ref(), &self.prompts, &self.config).with_evidence_chars(self.evidence_chars)
    }

    pub fn verify(&self, claim: &Claim) -> Result<VerdictReport, PipelineError> {
        let mut state = PipelineState::new(claim.clone(), self.config.clone(), self.ablations.clone());
        let agents = self.agents();

        let initial = agents.initial_query_gen(&state.claim, &mut state.trace)?;
        state.pending_queries.extend(initial);

        'search: loop {
            while let Some(query) = state.pending_queries.pop_front() {
                if state.ledger.consume().is_err() {
                    state.trace.push(Event::ScenarioDecision { url: None, decision: Decision::BudgetExhausted, phase: Phase::Loop });
                    state.pending_queries.clear();
                    break 'search;
                }
                state.issued_query_texts.insert(query_key(&query.text));
                let results = self.run_search(&mut state, &query)?;
                if results.is_empty() {
                    continue;
                }
                let ranked = if state.ablations.rm_sr {
                    results
                } else {
                    agents.search_rank(&state.claim, &query, results, &mut state.trace)?
                };
                for result in ranked {
                    self.process_result(&agents, &result, &mut state)?;
                    if state.sufficient {
                        return self.finish(&agents, state, TerminatedBy::SufficientEvidence);
                    }
                }
            }
            let remaining = state.ledger.remaining();
            if remaining == 0 {
                break;
            }
            let more = agents.additional_query_gen(
                &state.claim,
                &state.evidence,
                &state.issued_query_texts,
                remaining,
                &mut state.trace,
            )?;
            if more.is_empty() {
                break;
            }
            state.pending_queries.extend(more);
        }

        self.drain_deferred(&agents, &mut state)?;
        if state.sufficient {
            return self.finish(&agents, state, TerminatedBy::SufficientEvidence);
        }
        self.finish(&agents, state, TerminatedBy::BudgetExhausted)
    }

    fn run_search(&self, state: &mut PipelineState, query: &SearchQuery) -> Result<Vec<SearchResultMeta>, PipelineError> {
        let k = self.config.max_results_per_query;
        let outcome = self.search.search(query, k);
        let (results, error) = match outcome {
            Ok(results) => (results, None),
            Err(e) if e.is_fatal() => return Err(PipelineError::GatewayFatal(e.to_string())),
            Err(e) => {
                log::warn!("search {:?} failed: {e}", query.text);
                (Vec::new(), Some(e.to_string()))
            }
        };
        let results: Vec<_> = results.into_iter().take(k).collect();
        state.trace.push(Event::SearchCall {
            query: query.text.clone(),
            origin: query.origin,
            requested: k,
            returned: results.len(),
            queries_issued: state.ledger.queries_issued(),
            error,
        });
        Ok(results)
    }

    fn decide(state: &mut PipelineState, url: &str, decision: Decision, phase: Phase) {
        state.trace.push(Event::ScenarioDecision { url: Some(url.to_string()), decision, phase });
    }

    /// Reads one search result and applies the outcome rules above.
    pub fn process_result(
        &self,
        agents: &Agents<'_>,
        result: &SearchResultMeta,
        state: &mut PipelineState,
    ) -> Result<(), PipelineError> {
        if !state.seen_urls.insert(url_key(&result.url)) {
            Self::decide(state, &result.url, Decision::SeenBefore, Phase::Loop);
            return Ok(());
        }
        let doc = match self.pages.acquire(result) {
            Ok(doc) => {
                state.trace.push(Event::Fetch {
                    url: result.url.clone(),
                    acquisition: Some(doc.acquisition.clone()),
                    error: None,
                });
                doc
            }
            Err(unusable) => {
                state.trace.push(Event::Fetch { url: result.url.clone(), acquisition: None, error: Some(unusable.reason) });
                Self::decide(state, &result.url, Decision::Unusable, Phase::Loop);
                return Ok(());
            }
        };
        let comprehensible = state.ablations.rm_scc
            || agents.self_contained_check(&state.claim, &state.evidence, &doc, &mut state.trace)?;
        if !comprehensible {
            Self::decide(state, &result.url, Decision::NotSelfContained, Phase::Loop);
            state.trace.push(Event::Deferred { url: result.url.clone(), position: state.deferred.len() });
            state.deferred.push(doc);
            return Ok(());
        }
        self.assess(agents, &doc, state, Phase::Loop)
    }

    /// Helpfulness, evidence update and sufficiency for a comprehensible document.
    fn assess(&self, agents: &Agents<'_>, doc: &Document, state: &mut PipelineState, phase: Phase) -> Result<(), PipelineError> {
        let judgment = agents.det_helpful(&state.claim, &state.evidence, doc, &mut state.trace)?;
        if !judgment.helpful {
            Self::decide(state, &doc.meta.url, Decision::Irrelevant, phase);
            return Ok(());
        }
        let step = state.ledger.queries_issued();
        let item = match EvidenceItem::new(judgment.note, doc.meta.url.clone(), doc.meta.title.clone(), step) {
            Ok(item) => item,
            Err(e) => {
                log::warn!("discarding evidence from {}: {e}", doc.meta.url);
                Self::decide(state, &doc.meta.url, Decision::Irrelevant, phase);
                return Ok(());
            }
        };
        let note = item.note.clone();
        if state.evidence.insert(item) == Insertion::Duplicate {
            Self::decide(state, &doc.meta.url, Decision::DuplicateEvidence, phase);
            return Ok(());
        }
        state.trace.push(Event::EvidenceAdded { url: doc.meta.url.clone(), step, note });
        if agents.sufficient_evidence(&state.claim, &state.evidence, &mut state.trace)? {
            state.sufficient = true;
            Self::decide(state, &doc.meta.url, Decision::Sufficient, phase);
        } else {
            Self::decide(state, &doc.meta.url, Decision::Helpful, phase);
        }
        Ok(())
    }

    /// One FIFO pass over deferred documents against the current evidence.
    /// Documents still not comprehensible are dropped.
    pub fn drain_deferred(&self, agents: &Agents<'_>, state: &mut PipelineState) -> Result<(), PipelineError> {
        let deferred = std::mem::take(&mut state.deferred);
        for doc in deferred {
            if state.sufficient {
                break;
            }
            if !agents.self_contained_check(&state.claim, &state.evidence, &doc, &mut state.trace)? {
                Self::decide(state, &doc.meta.url, Decision::DrainDropped, Phase::Drain);
                continue;
            }
            self.assess(agents, &doc, state, Phase::Drain)?;
        }
        Ok(())
    }

    fn finish(&self, agents: &Agents<'_>, mut state: PipelineState, terminated_by: TerminatedBy) -> Result<VerdictReport, PipelineError> {
        let verdict = agents.classify(&state.claim, &state.evidence, &mut state.trace)?;
        state.trace.push(Event::Verdict { label: verdict, terminated_by });
        Ok(VerdictReport { verdict, evidence: state.evidence, trace: state.trace, terminated_by })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_parsing() {
        assert_eq!("rm-sr".parse::<Ablation>(), Ok(Ablation::RmSr));
        assert_eq!("RM_SCC".parse::<Ablation>(), Ok(Ablation::RmScc));
        assert!("rm-x".parse::<Ablation>().is_err());
        assert_eq!(Ablations::from_list(&[Ablation::RmScc]).label(), "RM-SCC");
    }
}
