//! Local-corpus wiki world for multi-hop questions and claim verification.
//!
//! Grammar: `search[entity]`, `lookup[keyword]`, `finish[answer]`. A search
//! for an exact title (case-insensitive) opens that page and shows its first
//! paragraph; anything else lists the most similar titles.

mod generate;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use generate::{generate_corpus, WikiConfig};

use super::{
    check_version, ActionPartition, EnvError, EnvKind, EnvSession, Environment, Feedback, Task,
    Verb, NOTHING_HAPPENS,
};

pub const NO_MORE_RESULTS: &str = "No more results.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaInstance {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    pub supporting_titles: Vec<String>,
    #[serde(default)]
    pub witness: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeverLabel {
    True,
    False,
    #[serde(rename = "Not Clear")]
    NotClear,
}

impl FeverLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FeverLabel::True => "True",
            FeverLabel::False => "False",
            FeverLabel::NotClear => "Not Clear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeverInstance {
    pub id: String,
    pub claim: String,
    pub label: FeverLabel,
    #[serde(default)]
    pub supporting_titles: Vec<String>,
    #[serde(default)]
    pub witness: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiCorpus {
    pub format_version: String,
    #[serde(default)]
    pub seed: u64,
    /// Title -> paragraphs -> sentences.
    pub articles: BTreeMap<String, Vec<Vec<String>>>,
    #[serde(default)]
    pub qa: Vec<QaInstance>,
    #[serde(default)]
    pub fever: Vec<FeverInstance>,
}

impl WikiCorpus {
    pub fn validate(&self) -> Result<(), EnvError> {
        check_version(&self.format_version)?;
        for title in self.articles.keys() {
            if title.trim().is_empty() || title.contains(['[', ']']) {
                return Err(EnvError::Invalid(format!("bad article title {title:?}")));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for q in &self.qa {
            if q.answers.is_empty() || q.answers.iter().any(|a| a.trim().is_empty()) {
                return Err(EnvError::Invalid(format!("{} has an empty answer", q.id)));
            }
            if q.question.trim().is_empty() {
                return Err(EnvError::Invalid(format!("{} has no question", q.id)));
            }
            for t in &q.supporting_titles {
                if !self.articles.contains_key(t) {
                    return Err(EnvError::Invalid(format!("{}: missing supporting title {t:?}", q.id)));
                }
            }
            if !ids.insert(q.id.clone()) {
                return Err(EnvError::Invalid(format!("duplicate task id {}", q.id)));
            }
        }
        for f in &self.fever {
            for t in &f.supporting_titles {
                if !self.articles.contains_key(t) {
                    return Err(EnvError::Invalid(format!("{}: missing supporting title {t:?}", f.id)));
                }
            }
            if !ids.insert(f.id.clone()) {
                return Err(EnvError::Invalid(format!("duplicate task id {}", f.id)));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path).map_err(|source| EnvError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let corpus: WikiCorpus = serde_json::from_str(&text)?;
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("corpus serializes")
    }

    /// Case-insensitive exact title match.
    pub fn find_title(&self, query: &str) -> Option<&str> {
        let q = query.trim().to_lowercase();
        self.articles
            .keys()
            .find(|t| t.to_lowercase() == q)
            .map(String::as_str)
    }

    fn sentences(&self, title: &str) -> Vec<&str> {
        self.articles
            .get(title)
            .map(|ps| ps.iter().flatten().map(String::as_str).collect())
            .unwrap_or_default()
    }
}

fn tokens(text: &str) -> std::collections::BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Titles ranked by `|shared tokens| / |union|`, ties broken by title.
pub fn similar_titles(corpus: &WikiCorpus, query: &str, k: usize) -> Vec<String> {
    let q = tokens(query);
    let mut scored: Vec<(f64, &String)> = corpus
        .articles
        .keys()
        .map(|title| {
            let t = tokens(title);
            let union = q.union(&t).count();
            let score = if union == 0 {
                0.0
            } else {
                q.intersection(&t).count() as f64 / union as f64
            };
            (score, title)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(k).map(|(_, t)| t.clone()).collect()
}

/// Lower-cases, drops punctuation and the articles a/an/the.
pub fn normalize_answer(text: &str) -> String {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WikiAction {
    Search(String),
    Lookup(String),
    Finish(String),
}

impl WikiAction {
    pub fn parse(action: &str) -> Option<Self> {
        let a = action.trim();
        let open = a.find('[')?;
        if !a.ends_with(']') {
            return None;
        }
        let verb = a[..open].trim().to_lowercase();
        let arg = a[open + 1..a.len() - 1].trim().to_string();
        match verb.as_str() {
            "search" if !arg.is_empty() => Some(WikiAction::Search(arg)),
            "lookup" if !arg.is_empty() => Some(WikiAction::Lookup(arg)),
            "finish" => Some(WikiAction::Finish(arg)),
            _ => None,
        }
    }

    pub fn verb(&self) -> Verb {
        match self {
            WikiAction::Search(_) => Verb::Search,
            WikiAction::Lookup(_) => Verb::Lookup,
            WikiAction::Finish(_) => Verb::Finish,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiState {
    pub task_id: String,
    pub page: Option<String>,
    /// Lower-cased keyword -> index of the next sentence to scan.
    pub cursors: BTreeMap<String, usize>,
    pub answer: Option<String>,
    pub solved: bool,
    pub done: bool,
}

#[derive(Debug, Clone)]
enum Target {
    Answers(Vec<String>),
    Label(FeverLabel),
}

#[derive(Debug, Clone)]
struct WikiTask {
    task: Task,
    target: Target,
    witness: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct WikiEnv {
    corpus: Arc<WikiCorpus>,
    tasks: Arc<Vec<WikiTask>>,
    partition: ActionPartition,
}

impl WikiEnv {
    pub fn new(corpus: WikiCorpus) -> Result<Self, EnvError> {
        corpus.validate()?;
        let mut tasks = Vec::new();
        for q in &corpus.qa {
            tasks.push(WikiTask {
                task: Task {
                    id: q.id.clone(),
                    description: q.question.clone(),
                    env: EnvKind::WikiQa,
                },
                target: Target::Answers(q.answers.clone()),
                witness: q.witness.clone(),
            });
        }
        for f in &corpus.fever {
            tasks.push(WikiTask {
                task: Task {
                    id: f.id.clone(),
                    description: f.claim.clone(),
                    env: EnvKind::WikiQa,
                },
                target: Target::Label(f.label),
                witness: f.witness.clone(),
            });
        }
        Ok(WikiEnv {
            corpus: Arc::new(corpus),
            tasks: Arc::new(tasks),
            partition: ActionPartition::default(),
        })
    }

    pub fn generate(seed: u64, count: usize, config: &WikiConfig) -> Self {
        WikiEnv::new(generate_corpus(seed, count, config)).expect("generated corpora are valid")
    }

    pub fn corpus(&self) -> &WikiCorpus {
        &self.corpus
    }

    fn wiki_task(&self, id: &str) -> Result<&WikiTask, EnvError> {
        self.tasks
            .iter()
            .find(|t| t.task.id == id)
            .ok_or_else(|| EnvError::UnknownTask(id.to_string()))
    }

    pub fn initial_state(&self, task_id: &str) -> Result<(WikiState, Feedback), EnvError> {
        let t = self.wiki_task(task_id)?;
        let state = WikiState {
            task_id: task_id.to_string(),
            page: None,
            cursors: BTreeMap::new(),
            answer: None,
            solved: false,
            done: false,
        };
        Ok((state, Feedback::observe(t.task.description.clone())))
    }

    pub fn step_state(&self, state: &WikiState, action: &str) -> Result<(WikiState, Feedback), EnvError> {
        if state.done {
            return Err(EnvError::EpisodeDone);
        }
        let task = self.wiki_task(&state.task_id)?;
        let Some(parsed) = WikiAction::parse(action) else {
            return Ok((state.clone(), Feedback::nothing()));
        };
        let mut next = state.clone();
        let feedback = match parsed {
            WikiAction::Search(q) => match self.corpus.find_title(&q) {
                Some(title) => {
                    next.page = Some(title.to_string());
                    next.cursors.clear();
                    let first = self.corpus.articles[title]
                        .first()
                        .map(|p| p.join(" "))
                        .unwrap_or_default();
                    Feedback::observe(first)
                }
                None => {
                    next.page = None;
                    next.cursors.clear();
                    let similar = similar_titles(&self.corpus, &q, 5)
                        .iter()
                        .map(|t| format!("'{t}'"))
                        .collect::<Vec<_>>()
                        .join(", ");
                    Feedback::observe(format!("Could not find [{q}]. Similar: [{similar}]."))
                }
            },
            WikiAction::Lookup(k) => {
                let Some(page) = next.page.clone() else {
                    return Ok((state.clone(), Feedback::observe(NOTHING_HAPPENS)));
                };
                let key = k.to_lowercase();
                let sentences = self.corpus.sentences(&page);
                let start = next.cursors.get(&key).copied().unwrap_or(0);
                let hit = sentences
                    .iter()
                    .enumerate()
                    .skip(start)
                    .find(|(_, s)| s.to_lowercase().contains(&key));
                match hit {
                    Some((i, s)) => {
                        next.cursors.insert(key, i + 1);
                        Feedback::observe(*s)
                    }
                    None => {
                        next.cursors.insert(key, sentences.len());
                        Feedback::observe(NO_MORE_RESULTS)
                    }
                }
            }
            WikiAction::Finish(answer) => {
                let correct = match &task.target {
                    Target::Answers(answers) => {
                        let a = normalize_answer(&answer);
                        !a.is_empty() && answers.iter().any(|g| normalize_answer(g) == a)
                    }
                    Target::Label(label) => normalize_answer(&answer) == normalize_answer(label.as_str()),
                };
                next.answer = Some(answer);
                next.done = true;
                next.solved = correct;
                if correct {
                    Feedback {
                        text: "Answer is CORRECT.\nTask completed.".into(),
                        reward: 1.0,
                        done: true,
                    }
                } else {
                    Feedback {
                        text: "Answer is INCORRECT.".into(),
                        reward: 0.0,
                        done: true,
                    }
                }
            }
        };
        Ok((next, feedback))
    }
}

struct WikiSession {
    env: WikiEnv,
    state: WikiState,
}

impl EnvSession for WikiSession {
    fn step(&mut self, action: &str) -> Result<Feedback, EnvError> {
        let (next, fb) = self.env.step_state(&self.state, action)?;
        self.state = next;
        Ok(fb)
    }

    fn is_done(&self) -> bool {
        self.state.done
    }

    fn goal_satisfied(&self) -> bool {
        self.state.solved
    }

    fn state_json(&self) -> String {
        serde_json::to_string(&self.state).expect("state serializes")
    }
}

impl Environment for WikiEnv {
    fn kind(&self) -> EnvKind {
        EnvKind::WikiQa
    }

    fn seed(&self) -> u64 {
        self.corpus.seed
    }

    fn tasks(&self) -> Vec<Task> {
        self.tasks.iter().map(|t| t.task.clone()).collect()
    }

    fn reset(&self, task_id: &str) -> Result<(Box<dyn EnvSession>, Feedback), EnvError> {
        let (state, fb) = self.initial_state(task_id)?;
        Ok((
            Box::new(WikiSession {
                env: self.clone(),
                state,
            }),
            fb,
        ))
    }

    fn verb(&self, action: &str) -> Option<Verb> {
        WikiAction::parse(action).map(|a| a.verb())
    }

    fn partition(&self) -> &ActionPartition {
        &self.partition
    }

    fn action_templates(&self) -> Vec<(Verb, &'static str)> {
        vec![
            (Verb::Search, "search[entity]"),
            (Verb::Lookup, "lookup[keyword]"),
            (Verb::Finish, "finish[answer]"),
        ]
    }

    fn witness(&self, task_id: &str) -> Result<Vec<String>, EnvError> {
        let t = self.wiki_task(task_id)?;
        if t.witness.is_empty() {
            return Err(EnvError::NoWitness(task_id.to_string()));
        }
        Ok(t.witness.clone())
    }

    fn noop_action(&self) -> Option<&'static str> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> WikiCorpus {
        let mut articles = BTreeMap::new();
        articles.insert(
            "Wendy Schaal".to_string(),
            vec![
                vec![
                    "Wendy Schaal is an American actress.".to_string(),
                    "She is best known for voicing Francine Smith in the animated comedy American Dad!.".to_string(),
                ],
                vec!["Schaal was born in Chicago.".to_string(), "Schaal also acted on stage.".to_string()],
            ],
        );
        for t in ["American Dad!", "American Pie", "Dad's Army"] {
            articles.insert(t.to_string(), vec![vec![format!("{t} is a title.")]]);
        }
        WikiCorpus {
            format_version: "1.0".into(),
            seed: 0,
            articles,
            qa: vec![QaInstance {
                id: "qa-0".into(),
                question: "Who voices Francine Smith?".into(),
                answers: vec!["Wendy Schaal".into()],
                supporting_titles: vec!["Wendy Schaal".into()],
                witness: vec!["search[Wendy Schaal]".into(), "finish[Wendy Schaal]".into()],
            }],
            fever: vec![],
        }
    }

    #[test]
    fn search_opens_first_paragraph() {
        let env = WikiEnv::new(corpus()).unwrap();
        let (s, fb) = env.initial_state("qa-0").unwrap();
        assert_eq!(fb.text, "Who voices Francine Smith?");
        let (s, fb) = env.step_state(&s, "search[wendy schaal]").unwrap();
        assert!(fb.text.starts_with("Wendy Schaal is an American actress. She is best known"));
        assert_eq!(s.page.as_deref(), Some("Wendy Schaal"));
    }

    #[test]
    fn similar_titles_rank_by_overlap() {
        let c = corpus();
        let got = similar_titles(&c, "American Dad", 5);
        assert_eq!(got[0], "American Dad!");
        assert_eq!(got[1], "American Pie");
        assert_eq!(got.len(), 4);
    }

    #[test]
    fn lookup_walks_matches_then_runs_out() {
        let env = WikiEnv::new(corpus()).unwrap();
        let (s, _) = env.initial_state("qa-0").unwrap();
        let (s, fb) = env.step_state(&s, "lookup[schaal]").unwrap();
        assert_eq!(fb.text, NOTHING_HAPPENS);
        let (s, _) = env.step_state(&s, "search[Wendy Schaal]").unwrap();
        let (s, a) = env.step_state(&s, "lookup[SCHAAL]").unwrap();
        let (s, b) = env.step_state(&s, "lookup[schaal]").unwrap();
        let (s, c) = env.step_state(&s, "lookup[schaal]").unwrap();
        let (_, d) = env.step_state(&s, "lookup[schaal]").unwrap();
        assert_eq!(a.text, "Wendy Schaal is an American actress.");
        assert_eq!(b.text, "Schaal was born in Chicago.");
        assert_eq!(c.text, "Schaal also acted on stage.");
        assert_eq!(d.text, NO_MORE_RESULTS);
    }

    #[test]
    fn finish_matches_normalized_answers() {
        let env = WikiEnv::new(corpus()).unwrap();
        let (s, _) = env.initial_state("qa-0").unwrap();
        let (s, fb) = env.step_state(&s, "finish[the wendy  schaal.]").unwrap();
        assert!(fb.done && fb.reward == 1.0 && s.solved);
        assert!(env.step_state(&s, "search[x]").is_err());
        assert_eq!(normalize_answer("An Apple, the Pie!"), "apple pie");
    }

    #[test]
    fn action_parse() {
        assert_eq!(WikiAction::parse("Search[ X ]"), Some(WikiAction::Search("X".into())));
        assert_eq!(WikiAction::parse("search[]"), None);
        assert_eq!(WikiAction::parse("search X"), None);
        assert_eq!(WikiAction::parse("finish[]"), Some(WikiAction::Finish(String::new())));
    }
}
