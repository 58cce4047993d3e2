//! Versioned prompt assets and slot rendering.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{ChatRequest, Message, Role};

/// Bumped whenever a bundled prompt text changes; recorded fixtures are tied to it.
pub const PROMPT_VERSION: &str = "v1";

const USER_MARKER: &str = "=== USER ===";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentKind {
    InitialQueryGen,
    SearchRank,
    SelfContainedCheck,
    DetHelpful,
    SufficientEvidence,
    Classifier,
    AdditionalQueryGen,
}

impl AgentKind {
    pub const ALL: [AgentKind; 7] = [
        AgentKind::InitialQueryGen,
        AgentKind::SearchRank,
        AgentKind::SelfContainedCheck,
        AgentKind::DetHelpful,
        AgentKind::SufficientEvidence,
        AgentKind::Classifier,
        AgentKind::AdditionalQueryGen,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            AgentKind::InitialQueryGen => "initial_query_gen",
            AgentKind::SearchRank => "search_rank",
            AgentKind::SelfContainedCheck => "self_contained_check",
            AgentKind::DetHelpful => "det_helpful",
            AgentKind::SufficientEvidence => "sufficient_evidence",
            AgentKind::Classifier => "classifier",
            AgentKind::AdditionalQueryGen => "additional_query_gen",
        }
    }

    /// Slots this agent supplies when rendering.
    pub fn slots(self) -> &'static [Slot] {
        use Slot::*;
        match self {
            AgentKind::InitialQueryGen => &[Claim, Limit],
            AgentKind::SearchRank => &[Claim, Query, Results],
            AgentKind::SelfContainedCheck | AgentKind::DetHelpful => &[Claim, Evidence, Document],
            AgentKind::SufficientEvidence | AgentKind::Classifier => &[Claim, Evidence],
            AgentKind::AdditionalQueryGen => &[Claim, Evidence, Limit],
        }
    }

    fn bundled(self) -> &'static str {
        match self {
            AgentKind::InitialQueryGen => include_str!("../../prompts/initial_query_gen.txt"),
            AgentKind::SearchRank => include_str!("../../prompts/search_rank.txt"),
            AgentKind::SelfContainedCheck => include_str!("../../prompts/self_contained_check.txt"),
            AgentKind::DetHelpful => include_str!("../../prompts/det_helpful.txt"),
            AgentKind::SufficientEvidence => include_str!("../../prompts/sufficient_evidence.txt"),
            AgentKind::Classifier => include_str!("../../prompts/classifier.txt"),
            AgentKind::AdditionalQueryGen => include_str!("../../prompts/additional_query_gen.txt"),
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Claim,
    Evidence,
    Query,
    Results,
    Document,
    Limit,
}

impl Slot {
    const ALL: [Slot; 6] = [Slot::Claim, Slot::Evidence, Slot::Query, Slot::Results, Slot::Document, Slot::Limit];

    pub fn name(self) -> &'static str {
        match self {
            Slot::Claim => "claim",
            Slot::Evidence => "evidence",
            Slot::Query => "query",
            Slot::Results => "results",
            Slot::Document => "document",
            Slot::Limit => "limit",
        }
    }

    fn from_name(name: &str) -> Option<Slot> {
        Slot::ALL.into_iter().find(|s| s.name() == name)
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("prompt {agent}: missing '{USER_MARKER}' separator")]
    MissingUserSection { agent: AgentKind },
    #[error("prompt {agent}: unknown slot {{{slot}}}")]
    UnknownSlot { agent: AgentKind, slot: String },
    #[error("prompt {agent}: slot {{{slot}}} is not available to this agent")]
    UnavailableSlot { agent: AgentKind, slot: &'static str },
    #[error("prompt {agent}: empty system or user text")]
    Empty { agent: AgentKind },
    #[error("reading prompt {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece {
    Text(usize, usize),
    Slot(Slot),
}

/// Splits `template` into literal text and `{slot}` references. Braces that
/// do not enclose a lowercase identifier are literal.
fn tokenize(template: &str) -> Result<Vec<Piece>, String> {
    let mut pieces = Vec::new();
    let bytes = template.as_bytes();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let rest = &template[i + 1..];
            let name_len = rest.bytes().take_while(|b| b.is_ascii_lowercase() || *b == b'_').count();
            if name_len > 0 && rest.as_bytes().get(name_len) == Some(&b'}') {
                let name = &rest[..name_len];
                let slot = Slot::from_name(name).ok_or_else(|| name.to_string())?;
                if start < i {
                    pieces.push(Piece::Text(start, i));
                }
                pieces.push(Piece::Slot(slot));
                i += name_len + 2;
                start = i;
                continue;
            }
        }
        i += 1;
    }
    if start < bytes.len() {
        pieces.push(Piece::Text(start, bytes.len()));
    }
    Ok(pieces)
}

/// Values for the slots of one rendering.
#[derive(Debug, Default, Clone)]
pub struct SlotValues<'a> {
    pub claim: Option<&'a str>,
    pub evidence: Option<&'a str>,
    pub query: Option<&'a str>,
    pub results: Option<&'a str>,
    pub document: Option<&'a str>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentPrompt {
    pub agent: AgentKind,
    pub system_text: String,
    pub user_template: String,
}

impl AgentPrompt {
    pub fn parse(agent: AgentKind, text: &str) -> Result<Self, PromptError> {
        let (system, user) = text
            .split_once(USER_MARKER)
            .ok_or(PromptError::MissingUserSection { agent })?;
        let prompt = AgentPrompt {
            agent,
            system_text: system.trim().to_string(),
            user_template: user.trim().to_string(),
        };
        if prompt.system_text.is_empty() || prompt.user_template.is_empty() {
            return Err(PromptError::Empty { agent });
        }
        prompt.check_slots()?;
        Ok(prompt)
    }

    fn check_slots(&self) -> Result<(), PromptError> {
        let pieces = tokenize(&self.user_template)
            .map_err(|slot| PromptError::UnknownSlot { agent: self.agent, slot })?;
        for piece in pieces {
            if let Piece::Slot(slot) = piece {
                if !self.agent.slots().contains(&slot) {
                    return Err(PromptError::UnavailableSlot { agent: self.agent, slot: slot.name() });
                }
            }
        }
        Ok(())
    }

    /// Fills the user template. Slots were validated at load time, and the
    /// agent layer always supplies every slot its kind declares.
    pub fn render(&self, values: &SlotValues<'_>) -> String {
        let pieces = tokenize(&self.user_template).expect("template validated at load");
        let mut out = String::with_capacity(self.user_template.len() * 2);
        for piece in pieces {
            match piece {
                Piece::Text(a, b) => out.push_str(&self.user_template[a..b]),
                Piece::Slot(slot) => {
                    let value = match slot {
                        Slot::Claim => values.claim.map(str::to_string),
                        Slot::Evidence => values.evidence.map(str::to_string),
                        Slot::Query => values.query.map(str::to_string),
                        Slot::Results => values.results.map(str::to_string),
                        Slot::Document => values.document.map(str::to_string),
                        Slot::Limit => values.limit.map(|n| n.to_string()),
                    };
                    let value = value.unwrap_or_else(|| panic!("slot {{{}}} not supplied for {}", slot.name(), self.agent));
                    out.push_str(&value);
                }
            }
        }
        out
    }

    pub fn request(&self, values: &SlotValues<'_>, model_id: &str, temperature: f64) -> ChatRequest {
        ChatRequest {
            model_id: model_id.to_string(),
            temperature,
            messages: vec![Message::system(self.system_text.clone()), Message::user(self.render(values))],
        }
    }
}

/// One prompt per agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    prompts: Vec<AgentPrompt>,
}

impl PromptSet {
    pub fn bundled() -> Self {
        let prompts = AgentKind::ALL
            .iter()
            .map(|&agent| AgentPrompt::parse(agent, agent.bundled()).expect("bundled prompt is valid"))
            .collect();
        Self { prompts }
    }

    /// Bundled prompts, with any `<agent>.txt` found in `dir` replacing its default.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::bundled();
        for prompt in set.prompts.iter_mut() {
            let path = dir.join(format!("{}.txt", prompt.agent.file_stem()));
            if !path.exists() {
                continue;
            }
            let text = fs::read_to_string(&path)
                .map_err(|source| PromptError::Io { path: path.display().to_string(), source })?;
            *prompt = AgentPrompt::parse(prompt.agent, &text)?;
        }
        Ok(set)
    }

    pub fn get(&self, agent: AgentKind) -> &AgentPrompt {
        self.prompts.iter().find(|p| p.agent == agent).expect("every agent has a prompt")
    }

    /// Which agent produced `request`, judged by its system message.
    pub fn identify(&self, request: &ChatRequest) -> Option<AgentKind> {
        let system = request.messages.iter().find(|m| m.role == Role::System)?;
        let text = system.content.trim_end();
        self.prompts.iter().find(|p| p.system_text == text).map(|p| p.agent)
    }
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::bundled()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_prompts_load() {
        let set = PromptSet::bundled();
        for agent in AgentKind::ALL {
            assert!(!set.get(agent).system_text.is_empty());
        }
    }

    #[test]
    fn system_texts_are_distinct() {
        let set = PromptSet::bundled();
        let mut texts: Vec<_> = AgentKind::ALL.iter().map(|a| set.get(*a).system_text.clone()).collect();
        texts.sort();
        texts.dedup();
        assert_eq!(texts.len(), 7);
    }

    #[test]
    fn render_fills_every_slot() {
        let p = AgentPrompt::parse(AgentKind::SearchRank, "sys\n=== USER ===\nC={claim} Q={query}\n{results}").unwrap();
        let out = p.render(&SlotValues { claim: Some("c"), query: Some("q"), results: Some("r"), ..Default::default() });
        assert_eq!(out, "C=c Q=q\nr");
    }

    #[test]
    fn literal_braces_survive() {
        let p = AgentPrompt::parse(AgentKind::Classifier, "sys\n=== USER ===\n{\"a\": 1} {claim} {}").unwrap();
        let out = p.render(&SlotValues { claim: Some("x"), evidence: Some("e"), ..Default::default() });
        assert_eq!(out, "{\"a\": 1} x {}");
    }

    #[test]
    fn unknown_and_unavailable_slots_rejected() {
        assert!(matches!(
            AgentPrompt::parse(AgentKind::Classifier, "s\n=== USER ===\n{nope}"),
            Err(PromptError::UnknownSlot { .. })
        ));
        assert!(matches!(
            AgentPrompt::parse(AgentKind::Classifier, "s\n=== USER ===\n{document}"),
            Err(PromptError::UnavailableSlot { .. })
        ));
        assert!(matches!(
            AgentPrompt::parse(AgentKind::Classifier, "no marker"),
            Err(PromptError::MissingUserSection { .. })
        ));
    }

    #[test]
    fn overrides_replace_single_agent() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("classifier.txt"), "custom system\n=== USER ===\n{claim}").unwrap();
        let set = PromptSet::with_overrides(dir.path()).unwrap();
        assert_eq!(set.get(AgentKind::Classifier).system_text, "custom system");
        assert_eq!(set.get(AgentKind::SearchRank), PromptSet::bundled().get(AgentKind::SearchRank));
    }

    #[test]
    fn identify_by_system_text() {
        let set = PromptSet::bundled();
        let req = set.get(AgentKind::DetHelpful).request(
            &SlotValues { claim: Some("c"), evidence: Some("e"), document: Some("d"), ..Default::default() },
            "m",
            1.0,
        );
        assert_eq!(set.identify(&req), Some(AgentKind::DetHelpful));
    }
}
