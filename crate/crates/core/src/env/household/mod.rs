//! Miniature household world.
//!
//! Rooms are joined by directed exits (not every pair is connected).
//! Receptacles live in rooms; some are openable and start closed, hiding their
//! contents. The agent stands in a room and carries at most one object.
//!
//! Grammar: `go to R`, `open X`, `take O from X`, `put O in/on X`,
//! `clean O with X`, `heat O with X`, `look around`, `examine X`. `go to` accepts a
//! room reachable by one exit, or a receptacle whose room is reachable at all.

mod engine;
mod generate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use engine::HouseholdState;
pub use generate::{generate_world, task_seed, WorldConfig, OBJECT_TYPES, ROOM_NAMES};

use super::{
    check_version, normalize_action, ActionPartition, EnvError, EnvKind, EnvSession, Environment,
    Feedback, Task, Verb,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceptacleKind {
    Countertop,
    Drawer,
    Cabinet,
    Shelf,
    Fridge,
    Sinkbasin,
    Microwave,
    Diningtable,
}

impl ReceptacleKind {
    pub const ALL: [ReceptacleKind; 8] = [
        ReceptacleKind::Countertop,
        ReceptacleKind::Drawer,
        ReceptacleKind::Cabinet,
        ReceptacleKind::Shelf,
        ReceptacleKind::Fridge,
        ReceptacleKind::Sinkbasin,
        ReceptacleKind::Microwave,
        ReceptacleKind::Diningtable,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ReceptacleKind::Countertop => "countertop",
            ReceptacleKind::Drawer => "drawer",
            ReceptacleKind::Cabinet => "cabinet",
            ReceptacleKind::Shelf => "shelf",
            ReceptacleKind::Fridge => "fridge",
            ReceptacleKind::Sinkbasin => "sinkbasin",
            ReceptacleKind::Microwave => "microwave",
            ReceptacleKind::Diningtable => "diningtable",
        }
    }

    pub fn openable(&self) -> bool {
        matches!(
            self,
            ReceptacleKind::Drawer
                | ReceptacleKind::Cabinet
                | ReceptacleKind::Fridge
                | ReceptacleKind::Microwave
        )
    }

    /// `in` for containers, `on` for surfaces.
    pub fn preposition(&self) -> &'static str {
        match self {
            ReceptacleKind::Countertop | ReceptacleKind::Shelf | ReceptacleKind::Diningtable => "on",
            _ => "in",
        }
    }
}

impl fmt::Display for ReceptacleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    /// Rooms reachable in one move from this one.
    pub exits: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receptacle {
    pub name: String,
    pub kind: ReceptacleKind,
    pub room: String,
}

impl Receptacle {
    pub fn openable(&self) -> bool {
        self.kind.openable()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskTemplate {
    Put,
    Clean,
    Heat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardScheme {
    /// Reward 1 on completion only.
    #[default]
    Binary,
    /// Partial rewards at crucial steps, cumulating to 100 on completion.
    Milestone,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseholdTask {
    pub id: String,
    pub template: TaskTemplate,
    pub object: String,
    pub target: String,
    pub description: String,
    pub start_room: String,
    /// Object -> receptacle at reset.
    pub placement: BTreeMap<String, String>,
    #[serde(default)]
    pub in_hand: Option<String>,
    #[serde(default)]
    pub witness: Vec<String>,
}

/// World file contents: the fixed layout plus per-task placements and witnesses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseholdWorld {
    pub format_version: String,
    pub seed: u64,
    #[serde(default)]
    pub reward_scheme: RewardScheme,
    pub rooms: Vec<Room>,
    pub receptacles: Vec<Receptacle>,
    pub objects: Vec<String>,
    pub tasks: Vec<HouseholdTask>,
}

impl HouseholdWorld {
    pub fn room(&self, name: &str) -> Option<&Room> {
        self.rooms.iter().find(|r| r.name == name)
    }

    pub fn receptacle(&self, name: &str) -> Option<&Receptacle> {
        self.receptacles.iter().find(|r| r.name == name)
    }

    pub fn receptacles_in<'a>(&'a self, room: &'a str) -> impl Iterator<Item = &'a Receptacle> + 'a {
        self.receptacles.iter().filter(move |r| r.room == room)
    }

    pub fn task(&self, id: &str) -> Option<&HouseholdTask> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Whether `to` can be reached from `from` following exits.
    pub fn reachable(&self, from: &str, to: &str) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from.to_string()];
        while let Some(room) = stack.pop() {
            if room == to {
                return true;
            }
            if !seen.insert(room.clone()) {
                continue;
            }
            if let Some(r) = self.room(&room) {
                stack.extend(r.exits.iter().cloned());
            }
        }
        false
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        check_version(&self.format_version)?;
        let rooms: BTreeSet<&str> = self.rooms.iter().map(|r| r.name.as_str()).collect();
        if rooms.len() != self.rooms.len() {
            return Err(EnvError::Invalid("duplicate room names".into()));
        }
        for r in &self.rooms {
            for e in &r.exits {
                if !rooms.contains(e.as_str()) {
                    return Err(EnvError::Invalid(format!("room {} exits to unknown {e}", r.name)));
                }
            }
        }
        let recs: BTreeSet<&str> = self.receptacles.iter().map(|r| r.name.as_str()).collect();
        for r in &self.receptacles {
            if !rooms.contains(r.room.as_str()) {
                return Err(EnvError::Invalid(format!("{} is in unknown room {}", r.name, r.room)));
            }
        }
        let objects: BTreeSet<&str> = self.objects.iter().map(String::as_str).collect();
        for t in &self.tasks {
            if !rooms.contains(t.start_room.as_str()) {
                return Err(EnvError::Invalid(format!("task {} starts in unknown room", t.id)));
            }
            if !recs.contains(t.target.as_str()) || !objects.contains(t.object.as_str()) {
                return Err(EnvError::Invalid(format!("task {} names unknown entities", t.id)));
            }
            for obj in &self.objects {
                let placed = t.placement.get(obj);
                let held = t.in_hand.as_deref() == Some(obj.as_str());
                if placed.is_some() == held {
                    return Err(EnvError::Invalid(format!(
                        "task {}: object {obj} must be in exactly one place",
                        t.id
                    )));
                }
                if let Some(rec) = placed {
                    if !recs.contains(rec.as_str()) {
                        return Err(EnvError::Invalid(format!("task {}: unknown receptacle {rec}", t.id)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path).map_err(|source| EnvError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let world: HouseholdWorld = serde_json::from_str(&text)?;
        world.validate()?;
        Ok(world)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("world serializes")
    }
}

/// A parsed household action. Names are normalized but not yet checked
/// against the world.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HouseholdAction {
    GoTo(String),
    Open(String),
    Take { object: String, from: String },
    Put { object: String, target: String },
    Clean { object: String, tool: String },
    Heat { object: String, tool: String },
    LookAround,
    Examine(String),
}

impl HouseholdAction {
    pub fn parse(action: &str) -> Option<Self> {
        let a = normalize_action(action);
        if a == "look around" || a == "look" {
            return Some(HouseholdAction::LookAround);
        }
        let nonempty = |s: &str| (!s.trim().is_empty()).then(|| s.trim().to_string());
        if let Some(rest) = a.strip_prefix("go to ") {
            return nonempty(rest).map(HouseholdAction::GoTo);
        }
        if let Some(rest) = a.strip_prefix("open ") {
            return nonempty(rest).map(HouseholdAction::Open);
        }
        if let Some(rest) = a.strip_prefix("examine ") {
            return nonempty(rest).map(HouseholdAction::Examine);
        }
        let pair = |rest: &str, seps: &[&str]| -> Option<(String, String)> {
            seps.iter().find_map(|sep| {
                let (l, r) = rest.split_once(sep)?;
                Some((nonempty(l)?, nonempty(r)?))
            })
        };
        if let Some(rest) = a.strip_prefix("take ") {
            let (object, from) = pair(rest, &[" from "])?;
            return Some(HouseholdAction::Take { object, from });
        }
        if let Some(rest) = a.strip_prefix("put ") {
            let (object, target) = pair(rest, &[" in/on ", " in ", " on "])?;
            return Some(HouseholdAction::Put { object, target });
        }
        if let Some(rest) = a.strip_prefix("clean ") {
            let (object, tool) = pair(rest, &[" with "])?;
            return Some(HouseholdAction::Clean { object, tool });
        }
        if let Some(rest) = a.strip_prefix("heat ") {
            let (object, tool) = pair(rest, &[" with "])?;
            return Some(HouseholdAction::Heat { object, tool });
        }
        None
    }

    pub fn verb(&self) -> Verb {
        match self {
            HouseholdAction::GoTo(_) => Verb::GoTo,
            HouseholdAction::Open(_) => Verb::Open,
            HouseholdAction::Take { .. } => Verb::Take,
            HouseholdAction::Put { .. } => Verb::Put,
            HouseholdAction::Clean { .. } => Verb::Clean,
            HouseholdAction::Heat { .. } => Verb::Heat,
            HouseholdAction::LookAround => Verb::LookAround,
            HouseholdAction::Examine(_) => Verb::Examine,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HouseholdEnv {
    world: Arc<HouseholdWorld>,
    partition: ActionPartition,
}

impl HouseholdEnv {
    pub fn new(world: HouseholdWorld) -> Result<Self, EnvError> {
        world.validate()?;
        Ok(HouseholdEnv {
            world: Arc::new(world),
            partition: ActionPartition::default(),
        })
    }

    /// Generates a fresh world with `count` tasks.
    pub fn generate(seed: u64, count: usize, config: &WorldConfig) -> Self {
        let world = generate_world(seed, count, config);
        HouseholdEnv::new(world).expect("generated worlds are valid")
    }

    pub fn with_partition(mut self, partition: ActionPartition) -> Self {
        self.partition = partition;
        self
    }

    pub fn world(&self) -> &HouseholdWorld {
        &self.world
    }

    /// The pure reset: initial state and opening observation.
    pub fn initial_state(&self, task_id: &str) -> Result<(HouseholdState, Feedback), EnvError> {
        let task = self
            .world
            .task(task_id)
            .ok_or_else(|| EnvError::UnknownTask(task_id.to_string()))?;
        Ok(engine::reset(&self.world, task))
    }

    /// The pure transition function.
    pub fn step_state(
        &self,
        state: &HouseholdState,
        action: &str,
    ) -> Result<(HouseholdState, Feedback), EnvError> {
        step_in(&self.world, state, action)
    }
}

fn step_in(
    world: &HouseholdWorld,
    state: &HouseholdState,
    action: &str,
) -> Result<(HouseholdState, Feedback), EnvError> {
    let task = world
        .task(&state.task_id)
        .ok_or_else(|| EnvError::UnknownTask(state.task_id.clone()))?;
    engine::step(world, task, state, action)
}

struct HouseholdSession {
    world: Arc<HouseholdWorld>,
    state: HouseholdState,
}

impl EnvSession for HouseholdSession {
    fn step(&mut self, action: &str) -> Result<Feedback, EnvError> {
        let (next, feedback) = step_in(&self.world, &self.state, action)?;
        self.state = next;
        Ok(feedback)
    }

    fn is_done(&self) -> bool {
        self.state.done
    }

    fn goal_satisfied(&self) -> bool {
        self.world
            .task(&self.state.task_id)
            .is_some_and(|t| engine::goal_satisfied(t, &self.state))
    }

    fn state_json(&self) -> String {
        serde_json::to_string(&self.state).expect("state serializes")
    }
}

impl Environment for HouseholdEnv {
    fn kind(&self) -> EnvKind {
        EnvKind::Household
    }

    fn seed(&self) -> u64 {
        self.world.seed
    }

    fn tasks(&self) -> Vec<Task> {
        self.world
            .tasks
            .iter()
            .map(|t| Task {
                id: t.id.clone(),
                description: t.description.clone(),
                env: EnvKind::Household,
            })
            .collect()
    }

    fn reset(&self, task_id: &str) -> Result<(Box<dyn EnvSession>, Feedback), EnvError> {
        let (state, feedback) = self.initial_state(task_id)?;
        let session = HouseholdSession {
            world: Arc::clone(&self.world),
            state,
        };
        Ok((Box::new(session), feedback))
    }

    fn verb(&self, action: &str) -> Option<Verb> {
        HouseholdAction::parse(action).map(|a| a.verb())
    }

    fn partition(&self) -> &ActionPartition {
        &self.partition
    }

    fn action_templates(&self) -> Vec<(Verb, &'static str)> {
        vec![
            (Verb::GoTo, "go to {room or receptacle}"),
            (Verb::Open, "open {receptacle}"),
            (Verb::LookAround, "look around"),
            (Verb::Examine, "examine {receptacle or object}"),
            (Verb::Take, "take {object} from {receptacle}"),
            (Verb::Put, "put {object} in/on {receptacle}"),
            (Verb::Clean, "clean {object} with {receptacle}"),
            (Verb::Heat, "heat {object} with {receptacle}"),
        ]
    }

    fn witness(&self, task_id: &str) -> Result<Vec<String>, EnvError> {
        let task = self
            .world
            .task(task_id)
            .ok_or_else(|| EnvError::UnknownTask(task_id.to_string()))?;
        if task.witness.is_empty() {
            return Err(EnvError::NoWitness(task_id.to_string()));
        }
        Ok(task.witness.clone())
    }

    fn noop_action(&self) -> Option<&'static str> {
        Some("look around")
    }

    fn milestone_rewards(&self) -> bool {
        self.world.reward_scheme == RewardScheme::Milestone
    }
}
