//! Rule-based stand-ins for the models.
//!
//! A stub is a pure function of the prompt text: it reads the header marker
//! to tell explore/exploit/extract/entity prompts apart, then reads the
//! current episode (everything after the last `Task:` line) back out of the
//! rendered prompt. No hidden state, so replaying a prompt always yields the
//! same completion.

pub mod household;
pub mod server;
pub mod wiki;

use std::sync::Arc;

use crate::env::EnvKind;
use crate::kg::{parse_triplets, KnowledgeTriplet};
use crate::llm::{CompletionBackend, FnBackend};

/// The parts of a rendered prompt a stub cares about.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PromptView {
    pub header: String,
    pub task: String,
    pub knowledge: Vec<KnowledgeTriplet>,
    pub initial: String,
    /// `(action, feedback)` pairs in order.
    pub steps: Vec<(String, String)>,
}

impl PromptView {
    pub fn parse(prompt: &str) -> Self {
        let lines: Vec<&str> = prompt.lines().collect();
        let header = lines.first().map(|l| l.trim().to_string()).unwrap_or_default();
        let Some(task_idx) = lines.iter().rposition(|l| l.starts_with("Task: ")) else {
            return PromptView {
                header,
                ..Default::default()
            };
        };
        let task = lines[task_idx]["Task: ".len()..].trim().to_string();
        let mut i = task_idx + 1;
        let mut knowledge = Vec::new();
        if lines.get(i).map(|l| l.trim()) == Some("Knowledge:") {
            i += 1;
            let start = i;
            while i < lines.len() && lines[i].starts_with('(') {
                i += 1;
            }
            knowledge = parse_triplets(&lines[start..i].join("\n")).triplets;
        }
        let mut end = lines.len();
        if end > i && lines[end - 1].trim() == ">" {
            end -= 1;
        }
        let mut initial = Vec::new();
        let mut steps: Vec<(String, Vec<&str>)> = Vec::new();
        for line in &lines[i..end] {
            if let Some(action) = line.strip_prefix("> ") {
                steps.push((action.trim().to_string(), Vec::new()));
            } else if let Some(last) = steps.last_mut() {
                last.1.push(line);
            } else {
                initial.push(*line);
            }
        }
        PromptView {
            header,
            task,
            knowledge,
            initial: initial.join("\n"),
            steps: steps.into_iter().map(|(a, f)| (a, f.join("\n"))).collect(),
        }
    }

    /// Every observation in order, starting with the initial one.
    pub fn observations(&self) -> impl Iterator<Item = (Option<&str>, &str)> {
        std::iter::once((None, self.initial.as_str()))
            .chain(self.steps.iter().map(|(a, f)| (Some(a.as_str()), f.as_str())))
    }
}

/// Text between the last `Observation:` and the following `Triplets:` line.
pub(crate) fn extract_observation(prompt: &str) -> String {
    let Some(start) = prompt.rfind("Observation: ") else {
        return String::new();
    };
    let rest = &prompt[start + "Observation: ".len()..];
    let end = rest.rfind("\nTriplets:").unwrap_or(rest.len());
    rest[..end].trim().to_string()
}

/// The task and inventory of an entity-extraction prompt.
pub(crate) fn entity_request(prompt: &str) -> (String, Vec<String>) {
    let last = |prefix: &str| {
        prompt
            .lines()
            .rev()
            .find_map(|l| l.strip_prefix(prefix))
            .unwrap_or("")
            .trim()
            .to_string()
    };
    let inventory = last("Inventory: ")
        .split(", ")
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    (last("Task: "), inventory)
}

/// Inventory entries mentioned in `text` as whole phrases, case-insensitively.
pub(crate) fn mentioned(text: &str, inventory: &[String]) -> Vec<String> {
    let hay = text.to_lowercase();
    inventory
        .iter()
        .filter(|e| {
            let needle = e.to_lowercase();
            hay.match_indices(&needle).any(|(i, _)| {
                let before = hay[..i].chars().next_back();
                let after = hay[i + needle.len()..].chars().next();
                !before.is_some_and(|c| c.is_alphanumeric()) && !after.is_some_and(|c| c.is_alphanumeric())
            })
        })
        .cloned()
        .collect()
}

fn respond(kind: EnvKind, prompt: &str) -> String {
    let header = prompt.lines().next().unwrap_or("").trim();
    match (kind, header) {
        (EnvKind::Household, "# explore") => household::explore(prompt),
        (EnvKind::Household, "# exploit" | "# react") => household::plan(prompt),
        (EnvKind::Household, "# extract") => household::extract(prompt),
        (EnvKind::Household, "# entities") => household::entities(prompt),
        (EnvKind::WikiQa, "# explore") => wiki::explore(prompt),
        (EnvKind::WikiQa, "# exploit" | "# react") => wiki::plan(prompt),
        (EnvKind::WikiQa, "# extract") => wiki::extract(prompt),
        (EnvKind::WikiQa, "# entities") => wiki::entities(prompt),
        _ => String::new(),
    }
}

/// A backend answering every shipped prompt kind for one environment kind.
pub fn rule_backend(kind: EnvKind, name: &str) -> Arc<dyn CompletionBackend> {
    Arc::new(FnBackend::new(name, move |prompt: &str| respond(kind, prompt)))
}
