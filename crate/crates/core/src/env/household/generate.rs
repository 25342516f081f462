//! Seeded world and task generation.
//!
//! The layout (rooms, exits, receptacles, objects) comes from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream 0. Task `i` draws from the same
//! seed on stream `i + 1` ([`task_seed`]), in this order:
//!
//! 1. placement: for each object in `world.objects` order, one
//!    `gen_range(0..receptacles.len())` indexing `world.receptacles`;
//! 2. start room: `gen_range(0..rooms.len())`;
//! 3. `gen_range(0..degenerate_one_in) == 0` selects a put task with the
//!    object already in hand;
//! 4. otherwise the template `gen_range(0..3)` over put, clean, heat;
//! 5. the object, then the target, each a `gen_range` over the eligible list.
//!
//! Tasks whose eligible lists come up empty fall back to a put task.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine;
use super::{HouseholdTask, HouseholdWorld, Receptacle, ReceptacleKind, RewardScheme, Room, TaskTemplate};
use crate::env::FORMAT_VERSION;

pub const ROOM_NAMES: [&str; 10] = [
    "kitchen",
    "hallway",
    "pantry",
    "living room",
    "bedroom",
    "bathroom",
    "laundry room",
    "study",
    "garage",
    "dining room",
];

pub const OBJECT_TYPES: [&str; 16] = [
    "apple", "knife", "mug", "plate", "bowl", "egg", "potato", "tomato", "bread", "spoon", "fork",
    "pan", "lettuce", "cup", "book", "keychain",
];

const HEATABLE: [&str; 8] = ["apple", "mug", "egg", "potato", "tomato", "bread", "cup", "plate"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub rooms: usize,
    pub objects: usize,
    /// Receptacles per room, inclusive range.
    pub receptacles_per_room: (usize, usize),
    /// Probability of a reverse exit on each ring edge.
    pub reverse_exit_p: f64,
    /// Probability of an extra one-way exit between two non-adjacent rooms.
    pub chord_p: f64,
    /// One task in this many is a put with the object already in hand.
    pub degenerate_one_in: u32,
    pub reward_scheme: RewardScheme,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            rooms: 6,
            objects: 20,
            receptacles_per_room: (3, 6),
            reverse_exit_p: 0.5,
            chord_p: 0.15,
            degenerate_one_in: 20,
            reward_scheme: RewardScheme::Binary,
        }
    }
}

impl WorldConfig {
    /// More receptacles per room, so finding an object takes real search.
    pub fn cluttered() -> Self {
        WorldConfig {
            receptacles_per_room: (4, 7),
            ..WorldConfig::default()
        }
    }
}

/// The RNG for task `index` of a world generated from `seed`.
pub fn task_seed(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn layout(seed: u64, config: &WorldConfig) -> (Vec<Room>, Vec<Receptacle>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.rooms.clamp(2, ROOM_NAMES.len());
    let mut names: Vec<String> = ROOM_NAMES[..n].iter().map(|s| s.to_string()).collect();
    names.shuffle(&mut rng);
    // directed ring keeps every room reachable
    let mut exits: Vec<Vec<String>> = vec![Vec::new(); n];
    for i in 0..n {
        let j = (i + 1) % n;
        exits[i].push(names[j].clone());
        if n > 2 && rng.gen_bool(config.reverse_exit_p) {
            exits[j].push(names[i].clone());
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && !exits[i].contains(&names[j]) && rng.gen_bool(config.chord_p) {
                exits[i].push(names[j].clone());
            }
        }
    }
    let rooms: Vec<Room> = names
        .iter()
        .zip(exits)
        .map(|(name, mut ex)| {
            ex.sort();
            Room {
                name: name.clone(),
                exits: ex,
            }
        })
        .collect();

    let (lo, hi) = config.receptacles_per_room;
    let mut kinds: Vec<(usize, ReceptacleKind)> = Vec::new();
    for (ri, _) in rooms.iter().enumerate() {
        let count = rng.gen_range(lo.max(1)..=hi.max(lo.max(1)));
        for _ in 0..count {
            let kind = *ReceptacleKind::ALL.choose(&mut rng).expect("non-empty");
            kinds.push((ri, kind));
        }
    }
    for tool in [ReceptacleKind::Sinkbasin, ReceptacleKind::Microwave] {
        if !kinds.iter().any(|(_, k)| *k == tool) {
            kinds.push((rng.gen_range(0..rooms.len()), tool));
        }
    }
    let mut counters: BTreeMap<ReceptacleKind, usize> = BTreeMap::new();
    let mut receptacles = Vec::new();
    for (ri, kind) in kinds {
        let c = counters.entry(kind).or_insert(0);
        *c += 1;
        receptacles.push(Receptacle {
            name: format!("{kind} {c}"),
            kind,
            room: rooms[ri].name.clone(),
        });
    }

    let mut objects = Vec::new();
    let mut obj_counters: BTreeMap<&str, usize> = BTreeMap::new();
    for _ in 0..config.objects.max(1) {
        let t = *OBJECT_TYPES.choose(&mut rng).expect("non-empty");
        let c = obj_counters.entry(t).or_insert(0);
        *c += 1;
        objects.push(format!("{t} {c}"));
    }
    (rooms, receptacles, objects)
}

fn object_type(object: &str) -> &str {
    object.rsplit_once(' ').map(|(t, _)| t).unwrap_or(object)
}

fn describe(template: TaskTemplate, object: &str, target: &Receptacle) -> String {
    let prep = target.kind.preposition();
    match template {
        TaskTemplate::Put => format!("put {object} {prep} {}", target.name),
        TaskTemplate::Clean => format!("clean {object} and put it {prep} {}", target.name),
        TaskTemplate::Heat => format!("heat {object} and put it {prep} {}", target.name),
    }
}

fn is_tool(kind: ReceptacleKind) -> bool {
    matches!(kind, ReceptacleKind::Sinkbasin | ReceptacleKind::Microwave)
}

fn make_task(
    world: &HouseholdWorld,
    index: usize,
    config: &WorldConfig,
) -> HouseholdTask {
    let mut rng = task_seed(world.seed, index);
    let recs = &world.receptacles;
    let mut placement = BTreeMap::new();
    for obj in &world.objects {
        let r = rng.gen_range(0..recs.len());
        placement.insert(obj.clone(), recs[r].name.clone());
    }
    let start_room = world.rooms[rng.gen_range(0..world.rooms.len())].name.clone();
    let degenerate = rng.gen_range(0..config.degenerate_one_in.max(1)) == 0;

    let id = format!("household-{index:04}");
    if degenerate {
        let object = world.objects[rng.gen_range(0..world.objects.len())].clone();
        let targets: Vec<&Receptacle> = recs
            .iter()
            .filter(|r| !r.openable() && !is_tool(r.kind))
            .collect();
        if !targets.is_empty() {
            let target = targets[rng.gen_range(0..targets.len())];
            placement.remove(&object);
            let mut task = HouseholdTask {
                id,
                template: TaskTemplate::Put,
                object: object.clone(),
                target: target.name.clone(),
                description: describe(TaskTemplate::Put, &object, target),
                start_room,
                placement,
                in_hand: Some(object),
                witness: Vec::new(),
            };
            task.witness = witness(world, &task);
            return task;
        }
    }

    let mut template = [TaskTemplate::Put, TaskTemplate::Clean, TaskTemplate::Heat][rng.gen_range(0..3)];
    let mut eligible: Vec<&String> = world
        .objects
        .iter()
        .filter(|o| template != TaskTemplate::Heat || HEATABLE.contains(&object_type(o)))
        .collect();
    if eligible.is_empty() {
        template = TaskTemplate::Put;
        eligible = world.objects.iter().collect();
    }
    let object = eligible[rng.gen_range(0..eligible.len())].clone();
    let source = placement[&object].clone();
    let targets: Vec<&Receptacle> = recs
        .iter()
        .filter(|r| !is_tool(r.kind) && r.name != source)
        .collect();
    let target = targets[rng.gen_range(0..targets.len())];
    let mut task = HouseholdTask {
        id,
        template,
        object: object.clone(),
        target: target.name.clone(),
        description: describe(template, &object, target),
        start_room,
        placement,
        in_hand: None,
        witness: Vec::new(),
    };
    task.witness = witness(world, &task);
    task
}

/// A shortest-in-spirit solution built from the task's ground truth.
pub(crate) fn witness(world: &HouseholdWorld, task: &HouseholdTask) -> Vec<String> {
    let mut actions = Vec::new();
    let obj = &task.object;
    if task.in_hand.as_deref() != Some(obj.as_str()) {
        let src = world
            .receptacle(&task.placement[obj])
            .expect("placement refers to a receptacle");
        actions.push(format!("go to {}", src.name));
        if src.openable() {
            actions.push(format!("open {}", src.name));
        }
        actions.push(format!("take {obj} from {}", src.name));
    }
    let tool_kind = match task.template {
        TaskTemplate::Put => None,
        TaskTemplate::Clean => Some(ReceptacleKind::Sinkbasin),
        TaskTemplate::Heat => Some(ReceptacleKind::Microwave),
    };
    if let Some(kind) = tool_kind {
        let tool = world
            .receptacles
            .iter()
            .find(|r| r.kind == kind)
            .expect("every world has a sinkbasin and a microwave");
        actions.push(format!("go to {}", tool.name));
        let verb = if kind == ReceptacleKind::Sinkbasin { "clean" } else { "heat" };
        actions.push(format!("{verb} {obj} with {}", tool.name));
    }
    let target = world.receptacle(&task.target).expect("target exists");
    actions.push(format!("go to {}", target.name));
    if target.openable() {
        actions.push(format!("open {}", target.name));
    }
    actions.push(format!("put {obj} in/on {}", target.name));
    actions
}

/// Builds a world with `count` tasks. Equal arguments give equal worlds.
pub fn generate_world(seed: u64, count: usize, config: &WorldConfig) -> HouseholdWorld {
    let (rooms, receptacles, objects) = layout(seed, config);
    let mut world = HouseholdWorld {
        format_version: FORMAT_VERSION.to_string(),
        seed,
        reward_scheme: config.reward_scheme,
        rooms,
        receptacles,
        objects,
        tasks: Vec::new(),
    };
    let tasks = (0..count.max(1)).map(|i| make_task(&world, i, config)).collect();
    world.tasks = tasks;
    debug_assert!(world.tasks.iter().all(|t| !engine::goal_satisfied(t, &initial(t))));
    world
}

fn initial(task: &HouseholdTask) -> engine::HouseholdState {
    engine::HouseholdState {
        task_id: task.id.clone(),
        location: task.start_room.clone(),
        inventory: task.in_hand.clone(),
        placement: task.placement.clone(),
        opened: Default::default(),
        clean: Default::default(),
        hot: Default::default(),
        milestones: Default::default(),
        score: 0.0,
        done: false,
    }
}
