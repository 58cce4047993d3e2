//! Claim verification with a team of LLM agents and iterative web search.
//!
//! The [`pipeline::Verifier`] drives seven agents over three gateways: a chat
//! backend ([`llm`]), a web search provider ([`search`]) and a page reader
//! ([`reader`]). Every gateway has a live, recording and replaying form.

pub mod agents;
pub mod eval;
pub mod http;
pub mod llm;
pub mod model;
pub mod pipeline;
pub mod reader;
pub mod search;
pub mod setup;
pub mod testkit;
pub mod trace;

pub use agents::{AgentKind, Agents, PromptSet};
pub use http::Mode;
pub use llm::ChatBackend;
pub use model::{
    BudgetConfig, BudgetExhausted, BudgetLedger, Claim, Document, EvidenceItem, EvidenceSet, ModelError, SearchQuery,
    SearchResultMeta, Verdict,
};
pub use pipeline::{Ablation, Ablations, PipelineError, Verifier, VerdictReport};
pub use reader::DocumentSource;
pub use search::SearchProvider;
pub use setup::{GatewayConfig, Gateways, SetupError};
pub use trace::{Event, RunTrace, TerminatedBy};
