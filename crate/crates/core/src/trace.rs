//! Ordered event log of one verification run, serializable as JSON lines.

use std::io::{self, BufRead, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::agents::AgentKind;
use crate::model::{Acquisition, QueryOrigin, Verdict};

/// What the pipeline decided about a search result or the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    /// Self-contained, helpful and now sufficient.
    Sufficient,
    /// Self-contained and helpful, more evidence needed.
    Helpful,
    /// Self-contained but adds nothing.
    Irrelevant,
    /// Not comprehensible yet; held for the end-of-loop pass.
    NotSelfContained,
    /// Helpful but the source was already in the evidence set.
    DuplicateEvidence,
    /// No usable text could be obtained.
    Unusable,
    /// URL already processed earlier in this run.
    SeenBefore,
    /// Deferred document still not comprehensible on its second look.
    DrainDropped,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Loop,
    Drain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentOutcome {
    Parsed,
    Fallback,
    Retried,
    ForcedDefault,
    ShortCircuit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminatedBy {
    SufficientEvidence,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum Event {
    AgentCall {
        agent: AgentKind,
        outcome: AgentOutcome,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reply: Option<String>,
        result: String,
    },
    SearchCall {
        query: String,
        origin: QueryOrigin,
        requested: usize,
        returned: usize,
        queries_issued: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Fetch {
        url: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        acquisition: Option<Acquisition>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    ScenarioDecision {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        url: Option<String>,
        decision: Decision,
        phase: Phase,
    },
    Deferred {
        url: String,
        position: usize,
    },
    EvidenceAdded {
        url: String,
        step: usize,
        note: String,
    },
    Verdict {
        label: Verdict,
        terminated_by: TerminatedBy,
    },
}

impl Event {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Event::AgentCall { .. } => "AgentCall",
            Event::SearchCall { .. } => "SearchCall",
            Event::Fetch { .. } => "Fetch",
            Event::ScenarioDecision { .. } => "ScenarioDecision",
            Event::Deferred { .. } => "Deferred",
            Event::EvidenceAdded { .. } => "EvidenceAdded",
            Event::Verdict { .. } => "Verdict",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Milliseconds since the Unix epoch.
    pub ts: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    events: Vec<TraceEvent>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn is_complete(&self) -> bool {
        matches!(self.events.last(), Some(TraceEvent { event: Event::Verdict { .. }, .. }))
    }

    /// Appends an event. Panics if the trace already holds its verdict.
    pub fn push(&mut self, event: Event) {
        assert!(!self.is_complete(), "trace already closed by a verdict");
        self.events.push(TraceEvent { ts: now_ms(), event });
    }

    pub fn agent_calls(&self, agent: AgentKind) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(&e.event, Event::AgentCall { agent: a, .. } if *a == agent))
            .count()
    }

    pub fn count(&self, kind: &str) -> usize {
        self.events.iter().filter(|e| e.event.kind_name() == kind).count()
    }

    /// Same trace with every timestamp zeroed.
    pub fn normalized(&self) -> RunTrace {
        RunTrace {
            events: self
                .events
                .iter()
                .map(|e| TraceEvent { ts: 0, event: e.event.clone() })
                .collect(),
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for event in &self.events {
            serde_json::to_writer(&mut out, event)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> io::Result<RunTrace> {
        let mut events = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line)?);
        }
        Ok(RunTrace { events })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn verdict() -> Event {
        Event::Verdict { label: Verdict::True, terminated_by: TerminatedBy::SufficientEvidence }
    }

    #[test]
    fn verdict_closes_trace() {
        let mut trace = RunTrace::new();
        trace.push(Event::Deferred { url: "https://a.org".into(), position: 0 });
        assert!(!trace.is_complete());
        trace.push(verdict());
        assert!(trace.is_complete());
        assert_eq!(trace.count("Verdict"), 1);
    }

    #[test]
    #[should_panic(expected = "already closed")]
    fn no_events_after_verdict() {
        let mut trace = RunTrace::new();
        trace.push(verdict());
        trace.push(verdict());
    }

    #[test]
    fn jsonl_round_trip() {
        let mut trace = RunTrace::new();
        trace.push(Event::AgentCall {
            agent: AgentKind::Classifier,
            outcome: AgentOutcome::Parsed,
            reply: Some("True".into()),
            result: "True".into(),
        });
        trace.push(verdict());
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().next().unwrap().contains("\"kind\":\"AgentCall\""));
        let back = RunTrace::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, trace);
        assert!(back.normalized().events().iter().all(|e| e.ts == 0));
    }
}
