//! Deterministic interactive text environments.
//!
//! Two worlds share one interface: a miniature multi-room household
//! ([`household`]) and a local-corpus wiki for question answering and claim
//! verification ([`wiki`]). Each defines its action grammar and the split of
//! that grammar into exploration and exploitation actions.

pub mod household;
pub mod wiki;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use household::{HouseholdEnv, HouseholdWorld, RewardScheme, WorldConfig};
pub use wiki::{WikiCorpus, WikiEnv};

/// Major version accepted by the world and corpus loaders.
pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_VERSION: &str = "1.0";

/// Text returned for any illegal or malformed action.
pub const NOTHING_HAPPENS: &str = "Nothing happens.";

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("episode already finished; reset before stepping")]
    EpisodeDone,
    #[error("task {0:?} has no witness solution")]
    NoWitness(String),
    #[error("unsupported format version {0:?}")]
    UnsupportedVersion(String),
    #[error("invalid world: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_version(v: &str) -> Result<(), EnvError> {
    let major = v.split('.').next().and_then(|m| m.parse::<u32>().ok());
    if major == Some(FORMAT_MAJOR) {
        Ok(())
    } else {
        Err(EnvError::UnsupportedVersion(v.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    Household,
    WikiQa,
}

impl EnvKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvKind::Household => "household",
            EnvKind::WikiQa => "wiki-qa",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EnvKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "household" => Ok(EnvKind::Household),
            "wiki-qa" | "wiki" => Ok(EnvKind::WikiQa),
            other => Err(format!("unknown environment kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub description: String,
    pub env: EnvKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub text: String,
    pub reward: f64,
    pub done: bool,
}

impl Feedback {
    pub fn observe(text: impl Into<String>) -> Self {
        Feedback {
            text: text.into(),
            reward: 0.0,
            done: false,
        }
    }

    pub fn nothing() -> Self {
        Feedback::observe(NOTHING_HAPPENS)
    }
}

/// Every action verb across both grammars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    GoTo,
    Open,
    Take,
    Put,
    Clean,
    Heat,
    LookAround,
    Examine,
    Search,
    Lookup,
    Finish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionClass {
    Exploration,
    Exploitation,
}

/// Which verbs count as exploration. Exploitation always admits the whole
/// grammar, so the two sets overlap on the exploration verbs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPartition {
    pub exploration: BTreeSet<Verb>,
}

impl Default for ActionPartition {
    fn default() -> Self {
        ActionPartition {
            exploration: [
                Verb::GoTo,
                Verb::Open,
                Verb::LookAround,
                Verb::Examine,
                Verb::Search,
                Verb::Lookup,
            ]
            .into_iter()
            .collect(),
        }
    }
}

impl ActionPartition {
    pub fn allows(&self, verb: Verb, class: ActionClass) -> bool {
        match class {
            ActionClass::Exploration => self.exploration.contains(&verb),
            ActionClass::Exploitation => true,
        }
    }
}

/// Static description of an environment instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvDescriptor {
    pub kind: EnvKind,
    pub seed: u64,
    pub tasks: Vec<Task>,
    /// Action templates usable during exploration.
    pub exploration_actions: Vec<String>,
    /// Action templates usable during exploitation (the full grammar).
    pub exploitation_actions: Vec<String>,
}

/// A live episode. States are single-owner; stepping a finished episode is a
/// usage error.
pub trait EnvSession: Send {
    fn step(&mut self, action: &str) -> Result<Feedback, EnvError>;
    fn is_done(&self) -> bool;
    fn goal_satisfied(&self) -> bool;
    /// Canonical JSON of the current state.
    fn state_json(&self) -> String;
}

pub trait Environment: Send + Sync {
    fn kind(&self) -> EnvKind;
    fn seed(&self) -> u64;
    fn tasks(&self) -> Vec<Task>;
    fn task(&self, id: &str) -> Option<Task> {
        self.tasks().into_iter().find(|t| t.id == id)
    }
    /// Deterministic initial state for `task_id` plus the opening observation.
    fn reset(&self, task_id: &str) -> Result<(Box<dyn EnvSession>, Feedback), EnvError>;
    /// Grammar-level parse of an action string, independent of state.
    fn verb(&self, action: &str) -> Option<Verb>;
    fn partition(&self) -> &ActionPartition;
    fn action_templates(&self) -> Vec<(Verb, &'static str)>;
    /// The stored witness solution for a generated task.
    fn witness(&self, task_id: &str) -> Result<Vec<String>, EnvError>;
    /// Substitute action for unusable model output, if the grammar has one.
    fn noop_action(&self) -> Option<&'static str>;
    /// Whether rewards accumulate towards 100 through milestones.
    fn milestone_rewards(&self) -> bool {
        false
    }
    /// Marker that ends an action line in prompts.
    fn stop_sequences(&self) -> Vec<String> {
        vec!["\n".to_string()]
    }

    fn classify(&self, action: &str) -> Option<ActionClass> {
        let verb = self.verb(action)?;
        if self.partition().allows(verb, ActionClass::Exploration) {
            Some(ActionClass::Exploration)
        } else {
            Some(ActionClass::Exploitation)
        }
    }

    fn admits(&self, action: &str, class: ActionClass) -> bool {
        self.verb(action)
            .is_some_and(|v| self.partition().allows(v, class))
    }

    fn descriptor(&self) -> EnvDescriptor {
        let templates = self.action_templates();
        EnvDescriptor {
            kind: self.kind(),
            seed: self.seed(),
            tasks: self.tasks(),
            exploration_actions: templates
                .iter()
                .filter(|(v, _)| self.partition().allows(*v, ActionClass::Exploration))
                .map(|(_, t)| t.to_string())
                .collect(),
            exploitation_actions: templates.iter().map(|(_, t)| t.to_string()).collect(),
        }
    }
}

/// Replays `actions` from a fresh reset and reports whether the goal was
/// reached, along with every feedback.
pub fn replay_actions(
    env: &dyn Environment,
    task_id: &str,
    actions: &[String],
) -> Result<(bool, Vec<Feedback>), EnvError> {
    let (mut session, _) = env.reset(task_id)?;
    let mut feedbacks = Vec::with_capacity(actions.len());
    for a in actions {
        feedbacks.push(session.step(a)?);
        if session.is_done() {
            break;
        }
    }
    Ok((session.goal_satisfied(), feedbacks))
}

/// Replays a task's witness and explains the first problem found: an action
/// outside the grammar, an action with no effect, or an unfinished goal.
pub fn check_witness(env: &dyn Environment, task_id: &str) -> Result<usize, String> {
    let witness = env.witness(task_id).map_err(|e| e.to_string())?;
    let (mut session, _) = env.reset(task_id).map_err(|e| e.to_string())?;
    for (i, action) in witness.iter().enumerate() {
        if env.verb(action).is_none() {
            return Err(format!("step {}: {action:?} is not in the grammar", i + 1));
        }
        let fb = session.step(action).map_err(|e| e.to_string())?;
        if fb.text == NOTHING_HAPPENS {
            return Err(format!("step {}: {action:?} is illegal here", i + 1));
        }
        if session.is_done() && i + 1 < witness.len() {
            return Err(format!("episode ended at step {} of {}", i + 1, witness.len()));
        }
    }
    if !session.goal_satisfied() {
        return Err("witness does not reach the goal".into());
    }
    Ok(witness.len())
}

/// Loads a household world or a wiki corpus, telling them apart by content.
pub fn load_environment(path: &Path) -> Result<Box<dyn Environment>, EnvError> {
    let text = std::fs::read_to_string(path).map_err(|source| EnvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("articles").is_some() {
        let corpus: WikiCorpus = serde_json::from_value(value)?;
        Ok(Box::new(WikiEnv::new(corpus)?))
    } else {
        let world: HouseholdWorld = serde_json::from_value(value)?;
        Ok(Box::new(HouseholdEnv::new(world)?))
    }
}

pub(crate) fn join_items(items: &[String]) -> String {
    match items.len() {
        0 => String::new(),
        1 => format!("a {}", items[0]),
        _ => {
            let mut parts: Vec<String> = items.iter().map(|i| format!("a {i}")).collect();
            let last = parts.pop().unwrap_or_default();
            format!("{}, and {}", parts.join(", "), last)
        }
    }
}

/// Trims, lower-cases and collapses whitespace; drops a trailing period.
pub(crate) fn normalize_action(action: &str) -> String {
    let joined = action.split_whitespace().collect::<Vec<_>>().join(" ");
    joined.trim_end_matches('.').trim().to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_gate() {
        assert!(check_version("1.0").is_ok());
        assert!(check_version("1.7").is_ok());
        assert!(check_version("2.0").is_err());
        assert!(check_version("x").is_err());
    }

    #[test]
    fn item_lists_read_naturally() {
        assert_eq!(join_items(&[]), "");
        assert_eq!(join_items(&["knife 1".into()]), "a knife 1");
        assert_eq!(
            join_items(&["knife 1".into(), "mug 2".into(), "cup 1".into()]),
            "a knife 1, a mug 2, and a cup 1"
        );
    }

    #[test]
    fn default_partition() {
        let p = ActionPartition::default();
        assert!(p.allows(Verb::GoTo, ActionClass::Exploration));
        assert!(!p.allows(Verb::Take, ActionClass::Exploration));
        assert!(p.allows(Verb::Take, ActionClass::Exploitation));
        assert!(p.allows(Verb::GoTo, ActionClass::Exploitation));
        assert!(!p.allows(Verb::Finish, ActionClass::Exploration));
    }
}
