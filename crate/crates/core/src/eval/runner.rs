//! Runs a verifier over many claims on a bounded pool of threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use super::{LabeledClaim, PredictionRecord};
use crate::pipeline::{VerdictReport, Verifier};

pub struct ClaimOutcome {
    pub record: PredictionRecord,
    pub report: Option<VerdictReport>,
}

/// Verifies every claim with up to `workers` threads. Outcomes come back in
/// input order whatever the scheduling. `progress` sees each outcome as it
/// finishes.
pub fn run_all(
    verifier: &Verifier,
    claims: &[LabeledClaim],
    workers: usize,
    progress: &(dyn Fn(usize, &ClaimOutcome) + Sync),
) -> Vec<ClaimOutcome> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ClaimOutcome>>> = Mutex::new((0..claims.len()).map(|_| None).collect());
    let workers = workers.clamp(1, claims.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = claims.get(i) else { break };
                let outcome = run_one(verifier, item);
                progress(i, &outcome);
                slots.lock().unwrap()[i] = Some(outcome);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|o| o.expect("every claim ran")).collect()
}

fn run_one(verifier: &Verifier, item: &LabeledClaim) -> ClaimOutcome {
    match verifier.verify(&item.claim) {
        Ok(report) => ClaimOutcome {
            record: PredictionRecord {
                claim_id: item.claim.id.clone(),
                gold: item.gold,
                predicted: Some(report.verdict),
                terminated_by: Some(report.terminated_by),
                error: None,
            },
            report: Some(report),
        },
        Err(e) => {
            log::warn!("claim {} failed: {e}", item.claim.id);
            ClaimOutcome {
                record: PredictionRecord {
                    claim_id: item.claim.id.clone(),
                    gold: item.gold,
                    predicted: None,
                    terminated_by: None,
                    error: Some(e.to_string()),
                },
                report: None,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::agents::{AgentKind, PromptSet};
    use crate::eval::DatasetKind;
    use crate::model::{BudgetConfig, Claim, Verdict};
    use crate::search::SearchError;
    use crate::testkit::{user_text, ScriptedLlm, StaticPages, StaticSearch};

    fn claims(n: usize) -> Vec<LabeledClaim> {
        (0..n)
            .map(|i| {
                let gold = Verdict::from(i % 3 != 0);
                let claim = Claim::new(format!("c{i}"), format!("statement {i} is {gold}")).unwrap();
                LabeledClaim { claim, gold, dataset: DatasetKind::FacToolKbqa }
            })
            .collect()
    }

    fn verifier() -> Verifier {
        let prompts = Arc::new(PromptSet::bundled());
        let llm = ScriptedLlm::new(prompts.clone(), |agent, req| match agent {
            AgentKind::InitialQueryGen => "1. q".into(),
            AgentKind::Classifier if user_text(req).contains("is True") => "True".into(),
            _ => "False".into(),
        });
        let search = StaticSearch::new(|_| Err(SearchError::Transport("down".into())));
        Verifier::new(
            Arc::new(llm),
            Arc::new(search),
            Arc::new(StaticPages::new(|_| None)),
            prompts,
            BudgetConfig { max_search_queries: 1, ..BudgetConfig::default() },
        )
        .unwrap()
    }

    #[test]
    fn outcomes_keep_input_order_for_any_pool_size() {
        let items = claims(23);
        let v = verifier();
        for workers in [1, 3, 8, 64] {
            let out = run_all(&v, &items, workers, &|_, _| {});
            let ids: Vec<_> = out.iter().map(|o| o.record.claim_id.as_str()).collect();
            let want: Vec<_> = items.iter().map(|c| c.claim.id.as_str()).collect();
            assert_eq!(ids, want);
            assert!(out.iter().all(|o| o.record.predicted == Some(o.record.gold)));
        }
    }

    #[test]
    fn gateway_failures_are_recorded_not_raised() {
        let prompts = Arc::new(PromptSet::bundled());
        let llm = ScriptedLlm::new(prompts.clone(), |_, _| "1. q".into());
        let search = StaticSearch::new(|_| Err(SearchError::Auth(403)));
        let v = Verifier::new(Arc::new(llm), Arc::new(search), Arc::new(StaticPages::new(|_| None)), prompts, BudgetConfig::default())
            .unwrap();
        let out = run_all(&v, &claims(2), 2, &|_, _| {});
        assert!(out.iter().all(|o| o.record.is_errored() && o.report.is_none()));
    }
}
