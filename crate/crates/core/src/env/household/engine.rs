use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{HouseholdAction, HouseholdTask, HouseholdWorld, ReceptacleKind, RewardScheme, TaskTemplate};
use crate::env::{join_items, EnvError, Feedback};

pub(crate) const COMPLETED_SUFFIX: &str = "Task completed.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdState {
    pub task_id: String,
    /// Current room.
    pub location: String,
    pub inventory: Option<String>,
    /// Object -> receptacle, for every object not in the inventory.
    pub placement: BTreeMap<String, String>,
    /// Openable receptacles currently open.
    pub opened: BTreeSet<String>,
    pub clean: BTreeSet<String>,
    pub hot: BTreeSet<String>,
    /// Milestones already paid out.
    pub milestones: BTreeSet<String>,
    pub score: f64,
    pub done: bool,
}

impl HouseholdState {
    /// Where an object is: a receptacle name, or `None` when carried or unknown.
    pub fn location_of(&self, object: &str) -> Option<&str> {
        self.placement.get(object).map(String::as_str)
    }
}

pub(crate) fn goal_satisfied(task: &HouseholdTask, state: &HouseholdState) -> bool {
    if state.placement.get(&task.object) != Some(&task.target) {
        return false;
    }
    match task.template {
        TaskTemplate::Put => true,
        TaskTemplate::Clean => state.clean.contains(&task.object),
        TaskTemplate::Heat => state.hot.contains(&task.object),
    }
}

pub(crate) fn reset(world: &HouseholdWorld, task: &HouseholdTask) -> (HouseholdState, Feedback) {
    let state = HouseholdState {
        task_id: task.id.clone(),
        location: task.start_room.clone(),
        inventory: task.in_hand.clone(),
        placement: task.placement.clone(),
        opened: BTreeSet::new(),
        clean: BTreeSet::new(),
        hot: BTreeSet::new(),
        milestones: BTreeSet::new(),
        score: 0.0,
        done: false,
    };
    let text = format!(
        "Your task is to: {}.\n{}",
        task.description,
        describe_room(world, &state)
    );
    (state, Feedback::observe(text))
}

fn accessible(world: &HouseholdWorld, state: &HouseholdState, rec: &str) -> bool {
    world
        .receptacle(rec)
        .is_some_and(|r| !r.openable() || state.opened.contains(rec))
}

fn contents(state: &HouseholdState, rec: &str) -> Vec<String> {
    state
        .placement
        .iter()
        .filter(|(_, r)| r.as_str() == rec)
        .map(|(o, _)| o.clone())
        .collect()
}

fn describe_contents(world: &HouseholdWorld, state: &HouseholdState, rec: &str) -> String {
    let kind = world.receptacle(rec).map(|r| r.kind).unwrap_or(ReceptacleKind::Countertop);
    if !accessible(world, state, rec) {
        return format!("The {rec} is closed.");
    }
    let items = contents(state, rec);
    let seen = if items.is_empty() {
        "nothing".to_string()
    } else {
        join_items(&items)
    };
    let prep = if kind.preposition() == "on" { "On" } else { "In" };
    format!("{prep} the {rec}, you see {seen}.")
}

pub(crate) fn describe_room(world: &HouseholdWorld, state: &HouseholdState) -> String {
    let room = &state.location;
    let recs: Vec<String> = world.receptacles_in(room).map(|r| r.name.clone()).collect();
    let mut text = format!("You are in the {room}. ");
    if recs.is_empty() {
        text.push_str("You see nothing.");
    } else {
        text.push_str(&format!("You see {}.", join_items(&recs)));
    }
    if let Some(obj) = &state.inventory {
        text.push_str(&format!(" You are carrying a {obj}."));
    }
    let exits = world.room(room).map(|r| r.exits.join(", ")).unwrap_or_default();
    if exits.is_empty() {
        text.push_str(" There are no exits.");
    } else {
        text.push_str(&format!(" Exits: {exits}."));
    }
    text
}

fn in_room(world: &HouseholdWorld, state: &HouseholdState, rec: &str) -> bool {
    world.receptacle(rec).is_some_and(|r| r.room == state.location)
}

fn kind_of(world: &HouseholdWorld, rec: &str) -> Option<ReceptacleKind> {
    world.receptacle(rec).map(|r| r.kind)
}

/// Milestone payouts. Only the task object counts.
fn milestone(task: &HouseholdTask, state: &mut HouseholdState, name: &str) -> f64 {
    if !state.milestones.insert(name.to_string()) {
        return 0.0;
    }
    let value = match (task.template, name) {
        (TaskTemplate::Put, "take") => 50.0,
        (_, "take") | (_, "clean") | (_, "heat") => 25.0,
        _ => 0.0,
    };
    state.score += value;
    value
}

pub(crate) fn step(
    world: &HouseholdWorld,
    task: &HouseholdTask,
    state: &HouseholdState,
    action: &str,
) -> Result<(HouseholdState, Feedback), EnvError> {
    if state.done {
        return Err(EnvError::EpisodeDone);
    }
    let Some(parsed) = HouseholdAction::parse(action) else {
        return Ok((state.clone(), Feedback::nothing()));
    };
    let milestones = world.reward_scheme == RewardScheme::Milestone;
    let mut next = state.clone();
    let mut reward = 0.0;
    let text = match parsed {
        HouseholdAction::LookAround => describe_room(world, &next),
        HouseholdAction::GoTo(target) => {
            if let Some(room) = world.room(&target) {
                let here = world.room(&next.location);
                let adjacent = room.name == next.location
                    || here.is_some_and(|h| h.exits.contains(&room.name));
                if !adjacent {
                    return Ok((state.clone(), Feedback::nothing()));
                }
                next.location = room.name.clone();
                describe_room(world, &next)
            } else if let Some(rec) = world.receptacle(&target) {
                if !world.reachable(&next.location, &rec.room) {
                    return Ok((state.clone(), Feedback::nothing()));
                }
                next.location = rec.room.clone();
                format!(
                    "You arrive at {} in the {}. {}",
                    rec.name,
                    rec.room,
                    describe_contents(world, &next, &rec.name)
                )
            } else {
                return Ok((state.clone(), Feedback::nothing()));
            }
        }
        HouseholdAction::Open(rec) => {
            let openable = world.receptacle(&rec).is_some_and(|r| r.openable());
            if !openable || !in_room(world, &next, &rec) || next.opened.contains(&rec) {
                return Ok((state.clone(), Feedback::nothing()));
            }
            next.opened.insert(rec.clone());
            format!("You open the {rec}. {}", describe_contents(world, &next, &rec))
        }
        HouseholdAction::Examine(name) => {
            if world.receptacle(&name).is_some() {
                if !in_room(world, &next, &name) {
                    return Ok((state.clone(), Feedback::nothing()));
                }
                describe_contents(world, &next, &name)
            } else {
                let held = next.inventory.as_deref() == Some(name.as_str());
                let visible = next
                    .placement
                    .get(&name)
                    .is_some_and(|r| in_room(world, &next, r) && accessible(world, &next, r));
                if !held && !visible {
                    return Ok((state.clone(), Feedback::nothing()));
                }
                let mut t = format!("This is a {name}.");
                if next.clean.contains(&name) {
                    t.push_str(" It is clean.");
                }
                if next.hot.contains(&name) {
                    t.push_str(" It is hot.");
                }
                t
            }
        }
        HouseholdAction::Take { object, from } => {
            let ok = next.inventory.is_none()
                && in_room(world, &next, &from)
                && accessible(world, &next, &from)
                && next.placement.get(&object) == Some(&from);
            if !ok {
                return Ok((state.clone(), Feedback::nothing()));
            }
            next.placement.remove(&object);
            next.inventory = Some(object.clone());
            if milestones && object == task.object {
                reward += milestone(task, &mut next, "take");
            }
            format!("You pick up the {object} from the {from}.")
        }
        HouseholdAction::Put { object, target } => {
            let ok = next.inventory.as_deref() == Some(object.as_str())
                && in_room(world, &next, &target)
                && accessible(world, &next, &target);
            if !ok {
                return Ok((state.clone(), Feedback::nothing()));
            }
            next.inventory = None;
            next.placement.insert(object.clone(), target.clone());
            let prep = kind_of(world, &target).map(|k| k.preposition()).unwrap_or("in");
            format!("You put the {object} {prep} the {target}.")
        }
        HouseholdAction::Clean { object, tool } => {
            let ok = next.inventory.as_deref() == Some(object.as_str())
                && in_room(world, &next, &tool)
                && kind_of(world, &tool) == Some(ReceptacleKind::Sinkbasin);
            if !ok {
                return Ok((state.clone(), Feedback::nothing()));
            }
            next.clean.insert(object.clone());
            if milestones && object == task.object && task.template == TaskTemplate::Clean {
                reward += milestone(task, &mut next, "clean");
            }
            format!("You clean the {object} using the {tool}.")
        }
        HouseholdAction::Heat { object, tool } => {
            let ok = next.inventory.as_deref() == Some(object.as_str())
                && in_room(world, &next, &tool)
                && kind_of(world, &tool) == Some(ReceptacleKind::Microwave);
            if !ok {
                return Ok((state.clone(), Feedback::nothing()));
            }
            next.hot.insert(object.clone());
            if milestones && object == task.object && task.template == TaskTemplate::Heat {
                reward += milestone(task, &mut next, "heat");
            }
            format!("You heat the {object} using the {tool}.")
        }
    };
    let mut text = text;
    if goal_satisfied(task, &next) {
        next.done = true;
        if milestones {
            reward += 100.0 - next.score;
            next.score = 100.0;
        } else {
            reward += 1.0;
            next.score = 1.0;
        }
        text.push('\n');
        text.push_str(COMPLETED_SUFFIX);
    }
    let done = next.done;
    Ok((next, Feedback { text, reward, done }))
}
