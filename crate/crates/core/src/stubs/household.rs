//! Household stubs: an explorer that sweeps rooms and receptacles, an
//! extractor for the observation templates, and a planner that uses whatever
//! it knows (injected knowledge or its own history) and searches otherwise.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{entity_request, extract_observation, mentioned, PromptView};
use crate::env::NOTHING_HAPPENS;
use crate::kg::KnowledgeTriplet;
use crate::orchestrator::DONE_EXPLORING;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    Put,
    Clean,
    Heat,
}

/// Parsed task description: template, object, target receptacle.
pub fn parse_task(description: &str) -> Option<(Goal, String, String)> {
    let d = description.trim().trim_end_matches('.').to_lowercase();
    let split_target = |rest: &str| -> Option<(String, String)> {
        for sep in [" in/on ", " in ", " on "] {
            if let Some((o, t)) = rest.split_once(sep) {
                return Some((o.trim().to_string(), t.trim().to_string()));
            }
        }
        None
    };
    for (prefix, goal) in [("clean ", Goal::Clean), ("heat ", Goal::Heat)] {
        if let Some(rest) = d.strip_prefix(prefix) {
            let (obj, tail) = rest.split_once(" and put it")?;
            let target = tail.trim_start_matches(" in/on").trim_start_matches(" in").trim_start_matches(" on");
            return Some((goal, obj.trim().to_string(), target.trim().to_string()));
        }
    }
    let rest = d.strip_prefix("put ")?;
    let (o, t) = split_target(rest)?;
    Some((Goal::Put, o, t))
}

fn sentences(text: &str) -> Vec<String> {
    text.split('\n')
        .flat_map(|line| line.split(". "))
        .map(|s| s.trim().trim_end_matches('.').trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn items(list: &str) -> Vec<String> {
    if list.trim() == "nothing" {
        return Vec::new();
    }
    list.split(", ")
        .map(|s| s.trim())
        .map(|s| s.strip_prefix("and ").unwrap_or(s))
        .map(|s| s.strip_prefix("a ").unwrap_or(s).trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// One fact read off an observation.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Fact {
    InRoom(String),
    RoomHas(String, Vec<String>),
    Exits(String, Vec<String>),
    Carrying(String),
    ArriveAt(String, String),
    Contents { rec: String, on: bool, items: Vec<String> },
    Closed(String),
    Opened(String),
    PickedUp(String, String),
    PutDown(String, String),
    Cleaned(String),
    Heated(String),
}

fn facts(text: &str) -> Vec<Fact> {
    let mut out = Vec::new();
    let mut room: Option<String> = None;
    for s in sentences(text) {
        if let Some(r) = s.strip_prefix("You are in the ") {
            room = Some(r.to_string());
            out.push(Fact::InRoom(r.to_string()));
        } else if let Some(list) = s.strip_prefix("You see ") {
            if let Some(r) = &room {
                out.push(Fact::RoomHas(r.clone(), items(list)));
            }
        } else if let Some(list) = s.strip_prefix("Exits: ") {
            if let Some(r) = &room {
                out.push(Fact::Exits(r.clone(), list.split(", ").map(str::to_string).collect()));
            }
        } else if let Some(o) = s.strip_prefix("You are carrying a ") {
            out.push(Fact::Carrying(o.to_string()));
        } else if let Some(rest) = s.strip_prefix("You arrive at ") {
            if let Some((rec, r)) = rest.split_once(" in the ") {
                out.push(Fact::ArriveAt(rec.to_string(), r.to_string()));
            }
        } else if let Some(rest) = s.strip_prefix("On the ").or_else(|| s.strip_prefix("In the ")) {
            if let Some((rec, list)) = rest.split_once(", you see ") {
                out.push(Fact::Contents {
                    rec: rec.to_string(),
                    on: s.starts_with("On "),
                    items: items(list),
                });
            }
        } else if let Some(rest) = s.strip_prefix("The ") {
            if let Some(rec) = rest.strip_suffix(" is closed") {
                out.push(Fact::Closed(rec.to_string()));
            }
        } else if let Some(rec) = s.strip_prefix("You open the ") {
            out.push(Fact::Opened(rec.to_string()));
        } else if let Some(rest) = s.strip_prefix("You pick up the ") {
            if let Some((o, r)) = rest.split_once(" from the ") {
                out.push(Fact::PickedUp(o.to_string(), r.to_string()));
            }
        } else if let Some(rest) = s.strip_prefix("You put the ") {
            let split = rest.split_once(" in the ").or_else(|| rest.split_once(" on the "));
            if let Some((o, r)) = split {
                out.push(Fact::PutDown(o.to_string(), r.to_string()));
            }
        } else if let Some(rest) = s.strip_prefix("You clean the ") {
            if let Some((o, _)) = rest.split_once(" using ") {
                out.push(Fact::Cleaned(o.to_string()));
            }
        } else if let Some(rest) = s.strip_prefix("You heat the ") {
            if let Some((o, _)) = rest.split_once(" using ") {
                out.push(Fact::Heated(o.to_string()));
            }
        }
    }
    out
}

/// Rule-based extraction over the observation templates.
pub fn extract_from(text: &str) -> Vec<KnowledgeTriplet> {
    let mut out = Vec::new();
    let mut push = |h: &str, r: &str, t: &str| {
        if let Ok(tr) = KnowledgeTriplet::new(h, r, t) {
            out.push(tr);
        }
    };
    for f in facts(text) {
        match f {
            Fact::RoomHas(room, recs) => recs.iter().for_each(|rec| push(rec, "is in", &room)),
            Fact::Exits(room, exits) => exits.iter().for_each(|e| push(&room, "leads to", e)),
            Fact::ArriveAt(rec, room) => push(&rec, "is in", &room),
            Fact::Contents { rec, on, items } => {
                let rel = if on { "is on" } else { "is in" };
                items.iter().for_each(|o| push(o, rel, &rec));
            }
            Fact::PutDown(o, rec) => push(&o, "is in", &rec),
            _ => {}
        }
    }
    out
}

pub fn extract(prompt: &str) -> String {
    extract_from(&extract_observation(prompt))
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Inventory entities named in the task.
pub fn entities(prompt: &str) -> String {
    let (task, inventory) = entity_request(prompt);
    mentioned(&task, &inventory).join(", ")
}

/// What the agent believes about the world after reading a prompt.
#[derive(Debug, Default, Clone)]
pub struct Belief {
    pub room: Option<String>,
    /// Receptacle most recently arrived at, while still in its room.
    pub at: Option<String>,
    pub described: BTreeSet<String>,
    pub room_receptacles: BTreeMap<String, Vec<String>>,
    pub exits: BTreeMap<String, BTreeSet<String>>,
    pub rec_room: BTreeMap<String, String>,
    pub checked: BTreeSet<String>,
    pub closed: BTreeSet<String>,
    pub object_at: BTreeMap<String, String>,
    pub carrying: Option<String>,
    pub clean: BTreeSet<String>,
    pub hot: BTreeSet<String>,
    /// Actions that produced "Nothing happens.".
    pub failed: BTreeSet<String>,
}

impl Belief {
    pub fn from_view(view: &PromptView) -> Self {
        let mut b = Belief::default();
        for t in &view.knowledge {
            let (h, r, tl) = (t.head.as_str(), t.relation.as_str(), t.tail.as_str());
            match r {
                "leads to" => {
                    b.exits.entry(h.to_string()).or_default().insert(tl.to_string());
                }
                "is in" | "is on" if looks_like_room(tl) => {
                    b.rec_room.insert(h.to_string(), tl.to_string());
                    b.room_receptacles.entry(tl.to_string()).or_default().push(h.to_string());
                }
                "is in" | "is on" => {
                    b.object_at.insert(h.to_string(), tl.to_string());
                }
                _ => {}
            }
        }
        for (action, text) in view.observations() {
            if text.trim() == NOTHING_HAPPENS {
                if let Some(a) = action {
                    b.failed.insert(a.to_string());
                }
                continue;
            }
            b.absorb(text);
        }
        b
    }

    fn absorb(&mut self, text: &str) {
        for f in facts(text) {
            match f {
                Fact::InRoom(r) => {
                    if self.room.as_deref() != Some(r.as_str()) {
                        self.at = None;
                    }
                    self.room = Some(r.clone());
                    self.described.insert(r);
                    // a room description lists the inventory only when carrying
                    if !text.contains("You are carrying") {
                        self.carrying = None;
                    }
                }
                Fact::RoomHas(r, recs) => {
                    for rec in &recs {
                        self.rec_room.insert(rec.clone(), r.clone());
                    }
                    self.room_receptacles.insert(r, recs);
                }
                Fact::Exits(r, ex) => {
                    self.exits.insert(r, ex.into_iter().collect());
                }
                Fact::Carrying(o) => self.carrying = Some(o),
                Fact::ArriveAt(rec, r) => {
                    self.room = Some(r.clone());
                    self.at = Some(rec.clone());
                    self.rec_room.insert(rec, r);
                }
                Fact::Contents { rec, items, .. } => {
                    self.checked.insert(rec.clone());
                    self.closed.remove(&rec);
                    self.object_at.retain(|o, r| *r != rec || items.contains(o));
                    for o in items {
                        self.object_at.insert(o, rec.clone());
                    }
                }
                Fact::Closed(rec) => {
                    self.closed.insert(rec);
                }
                Fact::Opened(rec) => {
                    self.closed.remove(&rec);
                }
                Fact::PickedUp(o, _) => {
                    self.object_at.remove(&o);
                    self.carrying = Some(o);
                }
                Fact::PutDown(o, rec) => {
                    self.carrying = None;
                    self.object_at.insert(o, rec);
                }
                Fact::Cleaned(o) => {
                    self.clean.insert(o);
                }
                Fact::Heated(o) => {
                    self.hot.insert(o);
                }
            }
        }
    }

    fn known_receptacles(&self) -> Vec<String> {
        let mut all: Vec<String> = self.rec_room.keys().cloned().collect();
        // current room first, then rooms in name order
        all.sort_by_key(|r| (self.rec_room.get(r) != self.room.as_ref(), self.rec_room[r].clone(), r.clone()));
        all
    }

    fn known_rooms(&self) -> BTreeSet<String> {
        let mut rooms: BTreeSet<String> = self.described.clone();
        for (r, ex) in &self.exits {
            rooms.insert(r.clone());
            rooms.extend(ex.iter().cloned());
        }
        rooms.extend(self.rec_room.values().cloned());
        rooms
    }

    /// Next hop from the current room towards the nearest room satisfying `want`.
    fn route_to(&self, want: impl Fn(&str) -> bool) -> Option<String> {
        let start = self.room.clone()?;
        let mut queue = VecDeque::from([(start.clone(), None::<String>)]);
        let mut seen = BTreeSet::from([start]);
        while let Some((room, first)) = queue.pop_front() {
            if let Some(first) = &first {
                if want(&room) {
                    return Some(first.clone());
                }
            }
            for next in self.exits.get(&room).into_iter().flatten() {
                if seen.insert(next.clone()) {
                    queue.push_back((next.clone(), first.clone().or_else(|| Some(next.clone()))));
                }
            }
        }
        None
    }

    fn allowed(&self, action: String) -> Option<String> {
        (!self.failed.contains(&action)).then_some(action)
    }

    /// Next observation step of a sweep, or `None` when nothing is left.
    pub fn sweep_step(&self) -> Option<String> {
        if let Some(room) = &self.room {
            if !self.described.contains(room) {
                return self.allowed("look around".into());
            }
        }
        if let Some(at) = &self.at {
            if self.closed.contains(at) {
                if let Some(a) = self.allowed(format!("open {at}")) {
                    return Some(a);
                }
            }
        }
        for rec in self.known_receptacles() {
            if self.checked.contains(&rec) || self.at.as_ref() == Some(&rec) {
                continue;
            }
            if self.closed.contains(&rec) && self.failed.contains(&format!("open {rec}")) {
                continue;
            }
            if let Some(a) = self.allowed(format!("go to {rec}")) {
                return Some(a);
            }
        }
        let undescribed: BTreeSet<String> = self
            .known_rooms()
            .into_iter()
            .filter(|r| !self.described.contains(r))
            .collect();
        if let Some(hop) = self.route_to(|r| undescribed.contains(r)) {
            return self.allowed(format!("go to {hop}"));
        }
        None
    }
}

fn looks_like_room(name: &str) -> bool {
    // receptacles and objects are numbered, rooms are not
    !name
        .rsplit(' ')
        .next()
        .is_some_and(|last| last.chars().all(|c| c.is_ascii_digit()))
}

/// Explorer: sweep until nothing is left unseen, then stop.
pub fn explore(prompt: &str) -> String {
    let view = PromptView::parse(prompt);
    let belief = Belief::from_view(&view);
    belief.sweep_step().unwrap_or_else(|| DONE_EXPLORING.to_string())
}

fn tool_for(belief: &Belief, kind: &str) -> String {
    belief
        .rec_room
        .keys()
        .find(|r| r.starts_with(&format!("{kind} ")))
        .cloned()
        .unwrap_or_else(|| format!("{kind} 1"))
}

/// Planner: act on known locations, search when the object is unknown.
pub fn plan(prompt: &str) -> String {
    let view = PromptView::parse(prompt);
    let Some((goal, obj, target)) = parse_task(&view.task) else {
        return "look around".into();
    };
    let b = Belief::from_view(&view);
    let at = |rec: &str| b.at.as_deref() == Some(rec);
    if b.carrying.as_deref() == Some(obj.as_str()) {
        let need = match goal {
            Goal::Clean if !b.clean.contains(&obj) => Some(("sinkbasin", "clean")),
            Goal::Heat if !b.hot.contains(&obj) => Some(("microwave", "heat")),
            _ => None,
        };
        if let Some((kind, verb)) = need {
            let tool = tool_for(&b, kind);
            return if at(&tool) {
                format!("{verb} {obj} with {tool}")
            } else {
                format!("go to {tool}")
            };
        }
        return if !at(&target) {
            format!("go to {target}")
        } else if b.closed.contains(&target) {
            format!("open {target}")
        } else {
            format!("put {obj} in/on {target}")
        };
    }
    if let Some(loc) = b.object_at.get(&obj) {
        return if !at(loc) {
            format!("go to {loc}")
        } else if b.closed.contains(loc) {
            format!("open {loc}")
        } else {
            format!("take {obj} from {loc}")
        };
    }
    b.sweep_step().unwrap_or_else(|| "look around".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_task_templates() {
        assert_eq!(
            parse_task("put knife 1 on countertop 2"),
            Some((Goal::Put, "knife 1".into(), "countertop 2".into()))
        );
        assert_eq!(
            parse_task("clean knife 1 and put it on countertop 2"),
            Some((Goal::Clean, "knife 1".into(), "countertop 2".into()))
        );
        assert_eq!(
            parse_task("heat egg 2 and put it in fridge 1"),
            Some((Goal::Heat, "egg 2".into(), "fridge 1".into()))
        );
        assert_eq!(parse_task("dance"), None);
    }

    #[test]
    fn extractor_reads_the_templates() {
        let t = extract_from("On the countertop 1, you see a knife 1.");
        assert_eq!(t, vec![KnowledgeTriplet::new("knife 1", "is on", "countertop 1").unwrap()]);
        let t = extract_from("You are in the kitchen. You see a drawer 1, and a sinkbasin 1. Exits: hallway.");
        assert_eq!(t.len(), 3);
        let t = extract_from("You open the drawer 1. In the drawer 1, you see a apple 1, a mug 2, and a cup 1.");
        assert_eq!(t.len(), 3);
        assert!(extract_from(NOTHING_HAPPENS).is_empty());
    }

    #[test]
    fn planner_takes_the_knowledge_shortcut() {
        let prompt = "# exploit\nTask: put apple 1 in fridge 1\nKnowledge:\n(apple 1 | is in | drawer 1)\nYour task is to: put apple 1 in fridge 1.\nYou are in the kitchen. You see a countertop 1, and a fridge 1. Exits: hallway.\n>";
        assert_eq!(plan(prompt), "go to drawer 1");
    }
}
