//! Prompt templates with `{{slot}}` placeholders.
//!
//! Layout of every shipped template: header marker, instructions, few-shot
//! examples, then the current episode starting at its `Task:` line, followed
//! by the knowledge block, the history and the action cue. A line holding
//! nothing but a slot is dropped when that slot renders empty.
//!
//! Template files keep their few-shot examples after a `=== examples ===`
//! line, separated by `---` lines.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::EnvKind;
use crate::kg::KnowledgeTriplet;
use crate::llm::estimate_tokens;

use super::OrchestratorError;

const EXAMPLES_MARKER: &str = "=== examples ===";
const EXAMPLE_SEPARATOR: &str = "---";

pub const SLOTS: [&str; 7] = [
    "fewshot",
    "task",
    "knowledge",
    "history",
    "observation",
    "entities",
    "actions",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptRole {
    Explore,
    Exploit,
    /// Exploit with interleaved `think:` lines.
    React,
    Extract,
    EntityExtract,
}

impl PromptRole {
    pub const ALL: [PromptRole; 5] = [
        PromptRole::Explore,
        PromptRole::Exploit,
        PromptRole::React,
        PromptRole::Extract,
        PromptRole::EntityExtract,
    ];

    pub fn file_stem(&self) -> &'static str {
        match self {
            PromptRole::Explore => "explore",
            PromptRole::Exploit => "exploit",
            PromptRole::React => "react",
            PromptRole::Extract => "extract",
            PromptRole::EntityExtract => "entities",
        }
    }

    fn mandatory(&self) -> &'static [&'static str] {
        match self {
            PromptRole::Explore | PromptRole::Exploit | PromptRole::React => &["task", "history"],
            PromptRole::Extract => &["observation"],
            PromptRole::EntityExtract => &["task", "entities"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub role: PromptRole,
    pub body: String,
    pub fewshot: Vec<String>,
}

fn slots_in(body: &str) -> Result<BTreeSet<String>, OrchestratorError> {
    let mut found = BTreeSet::new();
    let mut rest = body;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let end = after
            .find("}}")
            .ok_or_else(|| OrchestratorError::Config("unterminated {{ in prompt template".into()))?;
        found.insert(after[..end].trim().to_string());
        rest = &after[end + 2..];
    }
    Ok(found)
}

impl PromptTemplate {
    pub fn new(role: PromptRole, body: &str, fewshot: Vec<String>) -> Result<Self, OrchestratorError> {
        let t = PromptTemplate {
            role,
            body: body.to_string(),
            fewshot,
        };
        t.validate()?;
        Ok(t)
    }

    /// Parses the file layout described in the module docs.
    pub fn parse(role: PromptRole, text: &str) -> Result<Self, OrchestratorError> {
        let text = text.replace("\r\n", "\n");
        let (body, examples) = match text.split_once(&format!("\n{EXAMPLES_MARKER}\n")) {
            Some((b, e)) => (b.to_string(), e.to_string()),
            None => (text.clone(), String::new()),
        };
        let mut fewshot = Vec::new();
        let mut current = Vec::new();
        for line in examples.lines() {
            if line.trim() == EXAMPLE_SEPARATOR {
                push_example(&mut fewshot, &mut current);
            } else {
                current.push(line);
            }
        }
        push_example(&mut fewshot, &mut current);
        Self::new(role, body.trim_end(), fewshot)
    }

    pub fn load(role: PromptRole, path: &Path) -> Result<Self, OrchestratorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| OrchestratorError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(role, &text)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let slots = slots_in(&self.body)?;
        for s in &slots {
            if !SLOTS.contains(&s.as_str()) {
                return Err(OrchestratorError::Config(format!(
                    "{} template uses unknown slot {{{{{s}}}}}",
                    self.role.file_stem()
                )));
            }
        }
        for m in self.role.mandatory() {
            if !slots.contains(*m) {
                return Err(OrchestratorError::Config(format!(
                    "{} template is missing mandatory slot {{{{{m}}}}}",
                    self.role.file_stem()
                )));
            }
        }
        Ok(())
    }

    /// The first line of the body, used by stubs to tell prompts apart.
    pub fn header(&self) -> &str {
        self.body.lines().next().unwrap_or("")
    }
}

fn push_example(out: &mut Vec<String>, current: &mut Vec<&str>) {
    let text = current.join("\n").trim().to_string();
    if !text.is_empty() {
        out.push(text);
    }
    current.clear();
}

/// One entry of the episode history shown to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub action: String,
    pub feedback: String,
}

/// Initial observation followed by `> action` / feedback pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    pub initial: String,
    pub entries: Vec<HistoryEntry>,
}

impl History {
    pub fn new(initial: &str) -> Self {
        History {
            initial: initial.to_string(),
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, action: &str, feedback: &str) {
        self.entries.push(HistoryEntry {
            action: action.to_string(),
            feedback: feedback.to_string(),
        });
    }

    fn render_entries(&self, entries: &[HistoryEntry]) -> String {
        let mut out = self.initial.clone();
        for e in entries {
            out.push_str("\n> ");
            out.push_str(&e.action);
            out.push('\n');
            out.push_str(&e.feedback);
        }
        out
    }

    /// Full history, or the initial observation plus the most recent
    /// `keep_recent` entries when the estimate exceeds `window_tokens`.
    pub fn render(&self, window_tokens: u64, keep_recent: usize) -> String {
        let full = self.render_entries(&self.entries);
        if estimate_tokens(&full) <= window_tokens || self.entries.len() <= keep_recent {
            return full;
        }
        let tail = &self.entries[self.entries.len() - keep_recent..];
        self.render_entries(tail)
    }
}

/// Values for every slot. Empty strings count as absent.
#[derive(Debug, Clone, Default)]
pub struct PromptContext<'a> {
    pub task: &'a str,
    pub history: Option<&'a History>,
    pub knowledge: &'a [KnowledgeTriplet],
    pub observation: &'a str,
    pub entities: &'a [String],
    pub actions: &'a [String],
    pub window_tokens: u64,
    pub keep_recent: usize,
}

pub fn render_knowledge(knowledge: &[KnowledgeTriplet]) -> String {
    if knowledge.is_empty() {
        return String::new();
    }
    let mut out = String::from("Knowledge:");
    for t in knowledge {
        out.push('\n');
        out.push_str(&t.to_string());
    }
    out
}

fn slot_value(template: &PromptTemplate, ctx: &PromptContext<'_>, slot: &str) -> String {
    match slot {
        "fewshot" => template.fewshot.join("\n\n"),
        "task" => ctx.task.to_string(),
        "knowledge" => render_knowledge(ctx.knowledge),
        "history" => ctx
            .history
            .map(|h| h.render(ctx.window_tokens, ctx.keep_recent))
            .unwrap_or_default(),
        "observation" => ctx.observation.to_string(),
        "entities" => ctx.entities.join(", "),
        "actions" => ctx.actions.join(", "),
        _ => String::new(),
    }
}

/// Deterministic rendering. Lines consisting solely of an empty slot vanish.
pub fn render_prompt(template: &PromptTemplate, ctx: &PromptContext<'_>) -> Result<String, OrchestratorError> {
    template.validate()?;
    let mut lines = Vec::new();
    for line in template.body.lines() {
        let trimmed = line.trim();
        let lone_slot = trimmed.starts_with("{{")
            && trimmed.ends_with("}}")
            && trimmed.matches("{{").count() == 1;
        let mut rendered = String::with_capacity(line.len());
        let mut rest = line;
        while let Some(start) = rest.find("{{") {
            rendered.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after.find("}}").expect("validated");
            rendered.push_str(&slot_value(template, ctx, after[..end].trim()));
            rest = &after[end + 2..];
        }
        rendered.push_str(rest);
        if lone_slot && rendered.trim().is_empty() {
            continue;
        }
        lines.push(rendered);
    }
    let text = lines.join("\n");
    if text.trim().is_empty() {
        return Err(OrchestratorError::Config(format!(
            "{} template rendered empty",
            template.role.file_stem()
        )));
    }
    Ok(text)
}

/// One template per role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub explore: PromptTemplate,
    pub exploit: PromptTemplate,
    pub react: PromptTemplate,
    pub extract: PromptTemplate,
    pub entities: PromptTemplate,
}

macro_rules! shipped {
    ($env:literal) => {
        [
            include_str!(concat!("../../prompts/", $env, "/explore.txt")),
            include_str!(concat!("../../prompts/", $env, "/exploit.txt")),
            include_str!(concat!("../../prompts/", $env, "/react.txt")),
            include_str!(concat!("../../prompts/", $env, "/extract.txt")),
            include_str!(concat!("../../prompts/", $env, "/entities.txt")),
        ]
    };
}

impl PromptSet {
    fn from_texts(texts: [&str; 5]) -> Result<Self, OrchestratorError> {
        Ok(PromptSet {
            explore: PromptTemplate::parse(PromptRole::Explore, texts[0])?,
            exploit: PromptTemplate::parse(PromptRole::Exploit, texts[1])?,
            react: PromptTemplate::parse(PromptRole::React, texts[2])?,
            extract: PromptTemplate::parse(PromptRole::Extract, texts[3])?,
            entities: PromptTemplate::parse(PromptRole::EntityExtract, texts[4])?,
        })
    }

    /// The shipped templates for an environment kind.
    pub fn defaults(kind: EnvKind) -> Self {
        let texts = match kind {
            EnvKind::Household => shipped!("household"),
            EnvKind::WikiQa => shipped!("wiki"),
        };
        Self::from_texts(texts).expect("shipped prompts are valid")
    }

    /// Defaults overridden by any `<role>.txt` present in `dir`.
    pub fn load_dir(kind: EnvKind, dir: &Path) -> Result<Self, OrchestratorError> {
        let mut set = Self::defaults(kind);
        for role in PromptRole::ALL {
            let path = dir.join(format!("{}.txt", role.file_stem()));
            if path.exists() {
                *set.get_mut(role) = PromptTemplate::load(role, &path)?;
            }
        }
        Ok(set)
    }

    pub fn get(&self, role: PromptRole) -> &PromptTemplate {
        match role {
            PromptRole::Explore => &self.explore,
            PromptRole::Exploit => &self.exploit,
            PromptRole::React => &self.react,
            PromptRole::Extract => &self.extract,
            PromptRole::EntityExtract => &self.entities,
        }
    }

    fn get_mut(&mut self, role: PromptRole) -> &mut PromptTemplate {
        match role {
            PromptRole::Explore => &mut self.explore,
            PromptRole::Exploit => &mut self.exploit,
            PromptRole::React => &mut self.react,
            PromptRole::Extract => &mut self.extract,
            PromptRole::EntityExtract => &mut self.entities,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx<'a>(history: &'a History, knowledge: &'a [KnowledgeTriplet]) -> PromptContext<'a> {
        PromptContext {
            task: "put apple 1 in fridge 1",
            history: Some(history),
            knowledge,
            window_tokens: 6000,
            keep_recent: 20,
            ..Default::default()
        }
    }

    #[test]
    fn empty_knowledge_drops_the_block() {
        let set = PromptSet::defaults(EnvKind::Household);
        let h = History::new("You are in the kitchen.");
        let text = render_prompt(&set.exploit, &ctx(&h, &[])).unwrap();
        assert!(!text.contains("Knowledge:"));
        let k = vec![
            KnowledgeTriplet::new("apple 1", "is in", "drawer 1").unwrap(),
            KnowledgeTriplet::new("drawer 1", "is in", "kitchen").unwrap(),
        ];
        let text = render_prompt(&set.exploit, &ctx(&h, &k)).unwrap();
        let block: Vec<&str> = text
            .lines()
            .skip_while(|l| *l != "Knowledge:")
            .skip(1)
            .take_while(|l| l.starts_with('('))
            .collect();
        assert_eq!(block, ["(apple 1 | is in | drawer 1)", "(drawer 1 | is in | kitchen)"]);
    }

    #[test]
    fn missing_mandatory_slot_is_a_config_error() {
        assert!(PromptTemplate::new(PromptRole::Explore, "# explore\n{{task}}", vec![]).is_err());
        assert!(PromptTemplate::new(PromptRole::Extract, "{{observation}} {{bogus}}", vec![]).is_err());
        assert!(PromptTemplate::new(PromptRole::Extract, "{{observation", vec![]).is_err());
    }

    #[test]
    fn parse_splits_examples() {
        let t = PromptTemplate::parse(
            PromptRole::Extract,
            "# extract\n{{fewshot}}\nObservation: {{observation}}\n=== examples ===\nA\n---\nB\nC\n",
        )
        .unwrap();
        assert_eq!(t.fewshot, ["A", "B\nC"]);
        assert_eq!(t.header(), "# extract");
    }

    #[test]
    fn history_truncation_keeps_initial_and_recent() {
        let mut h = History::new("start");
        for i in 0..30 {
            h.push(&format!("go to r{i}"), &"x".repeat(40));
        }
        let full = h.render(1_000_000, 20);
        assert_eq!(full.matches("\n> ").count(), 30);
        let cut = h.render(10, 20);
        assert!(cut.starts_with("start\n> go to r10\n"));
        assert_eq!(cut.matches("\n> ").count(), 20);
    }

    #[test]
    fn all_shipped_sets_load() {
        for kind in [EnvKind::Household, EnvKind::WikiQa] {
            let set = PromptSet::defaults(kind);
            for role in PromptRole::ALL {
                assert!(set.get(role).header().starts_with('#'));
            }
        }
    }
}
