//! Decoupled explore/exploit episodes and the coupled baselines.
//!
//! A WESE episode: a cheap explorer walks the environment using observation
//! actions only, each feedback is turned into triplets, the triplets become a
//! graph, the task's entities select a slice of that graph, and a strong
//! exploiter solves the task from a fresh reset with that slice in its prompt.

mod episode;
pub mod prompt;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;
use crate::kg::KnowledgeTriplet;
use crate::llm::{CompletionBackend, CostLedger, LedgerSnapshot, LlmError, Role, RoleClient, TokenUsage};

pub use episode::{
    explore_phase, exploit_phase, extract_task_entities, extract_triplets, run_coupled_baseline,
    run_method, run_wese, ExploitOutcome, ExploreOutcome,
};
pub use prompt::{render_prompt, History, PromptContext, PromptRole, PromptSet, PromptTemplate};

/// Reserved reply that ends exploration early.
pub const DONE_EXPLORING: &str = "DONE_EXPLORING";
/// Prefix of a reasoning line in thought mode.
pub const THOUGHT_PREFIX: &str = "think:";

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{phase} phase: backend error: {source}")]
    Backend {
        phase: Phase,
        #[source]
        source: LlmError,
    },
    #[error("{phase} phase: environment error: {source}")]
    Env {
        phase: Phase,
        #[source]
        source: EnvError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Explore,
    Exploit,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Explore => "explore",
            Phase::Exploit => "exploit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseBudget {
    pub n_explore: usize,
    pub n_exploit: usize,
}

impl PhaseBudget {
    pub fn new(n_explore: usize, n_exploit: usize) -> Result<Self, OrchestratorError> {
        if n_explore == 0 || n_exploit == 0 {
            return Err(OrchestratorError::Config("phase budgets must be at least 1".into()));
        }
        Ok(PhaseBudget { n_explore, n_exploit })
    }

    /// 50/50 for decision environments.
    pub fn decision() -> Self {
        PhaseBudget {
            n_explore: 50,
            n_exploit: 50,
        }
    }

    /// 8/8 for question answering.
    pub fn qa() -> Self {
        PhaseBudget {
            n_explore: 8,
            n_exploit: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminatedBy {
    Budget,
    EnvComplete,
    AgentTerminate,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    /// The action actually executed.
    pub action: String,
    /// Model output when it differs from `action` (substituted no-ops).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    pub feedback: String,
    /// Fingerprint of the environment state after the step.
    pub state: String,
    pub reward: f64,
    pub usage: TokenUsage,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thoughts: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extracted: Vec<KnowledgeTriplet>,
    #[serde(default, skip_serializing_if = "TokenUsage::is_zero")]
    pub extraction_usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub phase: Phase,
    pub steps: Vec<StepRecord>,
    pub terminated_by: TerminatedBy,
    /// Action-selection calls, including thoughts and re-prompts.
    pub backend_calls: usize,
    /// Usage of calls that produced no step (a stop reply, or thoughts cut off by the budget).
    #[serde(default, skip_serializing_if = "TokenUsage::is_zero")]
    pub trailing_usage: TokenUsage,
}

impl Trajectory {
    fn new(phase: Phase) -> Self {
        Trajectory {
            phase,
            steps: Vec::new(),
            terminated_by: TerminatedBy::Budget,
            backend_calls: 0,
            trailing_usage: TokenUsage::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.action.clone()).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// 1-based index of the first step with positive reward.
    pub fn first_reward_step(&self) -> Option<usize> {
        self.steps.iter().position(|s| s.reward > 0.0).map(|i| i + 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<String>,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Act,
    React,
    ActWese,
    ReactWese,
    ActSese,
    ReactSese,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Act,
        Method::ActWese,
        Method::ActSese,
        Method::React,
        Method::ReactWese,
        Method::ReactSese,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Act => "act",
            Method::React => "react",
            Method::ActWese => "act-wese",
            Method::ReactWese => "react-wese",
            Method::ActSese => "act-sese",
            Method::ReactSese => "react-sese",
        }
    }

    /// Row label in reports.
    pub fn label(&self) -> &'static str {
        match self {
            Method::Act => "Act",
            Method::React => "ReAct",
            Method::ActWese => "Act-WESE",
            Method::ReactWese => "ReAct-WESE",
            Method::ActSese => "Act-SESE",
            Method::ReactSese => "ReAct-SESE",
        }
    }

    pub fn base(&self) -> Method {
        match self {
            Method::Act | Method::ActWese | Method::ActSese => Method::Act,
            _ => Method::React,
        }
    }

    pub fn decoupled(&self) -> bool {
        !matches!(self, Method::Act | Method::React)
    }

    pub fn thought_mode(&self) -> bool {
        self.base() == Method::React
    }

    pub fn strong_explorer(&self) -> bool {
        matches!(self, Method::ActSese | Method::ReactSese)
    }

    pub fn from_label(label: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.label() == label)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// The three model roles of an episode. Explorer and extractor may share a backend.
#[derive(Debug, Clone)]
pub struct Agents {
    pub explorer: RoleClient,
    pub extractor: RoleClient,
    pub exploiter: RoleClient,
}

impl Agents {
    /// Weak model explores and extracts, strong model exploits.
    pub fn wese(
        weak: Arc<dyn CompletionBackend>,
        strong: Arc<dyn CompletionBackend>,
        ledger: Arc<CostLedger>,
    ) -> Self {
        Agents {
            explorer: RoleClient::new(weak.clone(), Role::WeakExplore, ledger.clone()),
            extractor: RoleClient::new(weak, Role::Extraction, ledger.clone()),
            exploiter: RoleClient::new(strong, Role::StrongExploit, ledger),
        }
    }

    /// The strong model does everything. Price extraction at the strong rate.
    pub fn sese(strong: Arc<dyn CompletionBackend>, ledger: Arc<CostLedger>) -> Self {
        Agents {
            explorer: RoleClient::new(strong.clone(), Role::StrongExplore, ledger.clone()),
            extractor: RoleClient::new(strong.clone(), Role::Extraction, ledger.clone()),
            exploiter: RoleClient::new(strong, Role::StrongExploit, ledger),
        }
    }

    /// A single strong model for the coupled baselines.
    pub fn single(strong: Arc<dyn CompletionBackend>, ledger: Arc<CostLedger>) -> Self {
        Self::sese(strong, ledger)
    }

    pub fn ledger(&self) -> &Arc<CostLedger> {
        self.exploiter.ledger()
    }
}

/// Which graph slice the exploiter sees.
pub use crate::kg::RetrievalConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeOptions {
    pub action_max_tokens: u32,
    pub extract_max_tokens: u32,
    /// History is truncated once its estimate exceeds this many tokens.
    pub history_window_tokens: u64,
    pub keep_recent: usize,
    /// Skip extraction when the feedback repeats an earlier one verbatim.
    pub dedup_extraction: bool,
    /// Upper bound on action calls per step budget, counting thoughts and re-prompts.
    pub calls_per_step: usize,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        EpisodeOptions {
            action_max_tokens: 64,
            extract_max_tokens: 256,
            history_window_tokens: 6000,
            keep_recent: 20,
            dedup_extraction: false,
            calls_per_step: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: String,
    pub method: Method,
    pub success: bool,
    pub total_reward: f64,
    /// Exploit steps to the first positive reward.
    pub first_reward_step: Option<usize>,
    pub explore: Option<Trajectory>,
    pub exploit: Trajectory,
    pub plan: Plan,
    /// Serialized knowledge graph.
    pub graph: String,
    pub task_entities: Vec<String>,
    pub retrieved: Vec<KnowledgeTriplet>,
    pub ledger: LedgerSnapshot,
    pub error: Option<String>,
}

impl EpisodeResult {
    /// A task that failed before any model call.
    pub fn failed(task_id: &str, method: Method, error: impl Into<String>) -> Self {
        let mut exploit = Trajectory::new(Phase::Exploit);
        exploit.terminated_by = TerminatedBy::Error;
        EpisodeResult {
            task_id: task_id.to_string(),
            method,
            success: false,
            total_reward: 0.0,
            first_reward_step: None,
            explore: None,
            exploit,
            plan: Plan::default(),
            graph: crate::kg::serialize(&crate::kg::KnowledgeGraph::new()),
            task_entities: Vec::new(),
            retrieved: Vec::new(),
            ledger: CostLedger::default().snapshot(),
            error: Some(error.into()),
        }
    }

    /// Environment steps taken while exploiting (the AS numerator).
    pub fn steps(&self) -> usize {
        self.exploit.len()
    }

    /// Canonical JSON; byte-identical for identical episodes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("episode result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
