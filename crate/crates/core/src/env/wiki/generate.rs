//! Synthetic corpus generation.
//!
//! Each task gets its own small cluster of articles (an actor, a character,
//! a series) drawn from name pools, plus a few near-miss distractor titles so
//! failed searches have something to suggest. Key facts always sit in the
//! first paragraph; the second paragraph is filler for `lookup`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeverInstance, FeverLabel, QaInstance, WikiCorpus};
use crate::env::FORMAT_VERSION;

const FIRST: [&str; 24] = [
    "Wendy", "Marcus", "Elena", "Tobias", "Priya", "Jonah", "Greta", "Felix", "Nadia", "Oscar",
    "Lena", "Victor", "Hazel", "Ruben", "Ingrid", "Caleb", "Mira", "Dario", "Selma", "Hugo",
    "Ada", "Boris", "Clara", "Emil",
];
const LAST: [&str; 24] = [
    "Schaal", "Okafor", "Lindqvist", "Moreau", "Castellano", "Whitford", "Nakamura", "Petrov",
    "Abernathy", "Quinlan", "Osei", "Halvorsen", "Brandt", "Ferreira", "Kowalski", "Delacroix",
    "Ashworth", "Varga", "Sorensen", "Marchetti", "Tanaka", "Ilves", "Roche", "Baptiste",
];
const ADJ: [&str; 16] = [
    "Silver", "Hidden", "Crooked", "Painted", "Quiet", "Broken", "Golden", "Lonely", "Rusty",
    "Velvet", "Midnight", "Frozen", "Wandering", "Copper", "Hollow", "Restless",
];
const NOUN: [&str; 16] = [
    "Harbor", "Valley", "Kingdom", "Lantern", "Orchard", "Frontier", "Mansion", "Circus", "Island",
    "Garden", "Station", "Parade", "Meadow", "Tower", "Bridge", "Carnival",
];
const CITIES: [&str; 16] = [
    "Chicago", "Lisbon", "Osaka", "Toronto", "Nairobi", "Bergen", "Porto", "Dublin", "Adelaide",
    "Krakow", "Valencia", "Tampere", "Cordoba", "Leipzig", "Halifax", "Ghent",
];
const GENRES: [&str; 4] = ["animated comedy", "drama", "science fiction", "mystery"];
const FILLER: [&str; 6] = [
    "{} received mixed reviews at first.",
    "Critics later praised {} for its consistency.",
    "{} has been discussed in several retrospectives.",
    "A documentary about {} was announced but never released.",
    "{} remains popular in syndication.",
    "Fans often debate the legacy of {}.",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WikiConfig {
    /// Every `fever_every`-th task is a claim; the rest are questions.
    pub fever_every: usize,
    /// Near-miss titles added per task.
    pub distractors: usize,
}

impl Default for WikiConfig {
    fn default() -> Self {
        WikiConfig {
            fever_every: 3,
            distractors: 2,
        }
    }
}

struct Builder {
    rng: ChaCha8Rng,
    articles: BTreeMap<String, Vec<Vec<String>>>,
    used: BTreeSet<String>,
}

impl Builder {
    fn fresh(&mut self, make: impl Fn(&mut ChaCha8Rng) -> String) -> String {
        for attempt in 0.. {
            let mut name = make(&mut self.rng);
            if attempt > 20 {
                name = format!("{name} {}", attempt - 19);
            }
            if self.used.insert(name.to_lowercase()) {
                return name;
            }
        }
        unreachable!()
    }

    fn person(&mut self) -> String {
        self.fresh(|r| format!("{} {}", FIRST.choose(r).unwrap(), LAST.choose(r).unwrap()))
    }

    fn series(&mut self) -> String {
        self.fresh(|r| format!("The {} {}", ADJ.choose(r).unwrap(), NOUN.choose(r).unwrap()))
    }

    fn filler(&mut self, subject: &str) -> Vec<String> {
        let mut lines: Vec<&str> = FILLER.to_vec();
        lines.shuffle(&mut self.rng);
        lines[..3].iter().map(|l| l.replace("{}", subject)).collect()
    }

    fn add(&mut self, title: &str, first: Vec<String>) {
        let filler = self.filler(title);
        self.articles.insert(title.to_string(), vec![first, filler]);
    }

    fn distractor(&mut self, near: &str) {
        let surname = near.split_whitespace().last().unwrap_or(near).to_string();
        let title = self.fresh(move |r| format!("{} {}", FIRST.choose(r).unwrap(), surname));
        let city = *CITIES.choose(&mut self.rng).unwrap();
        self.add(&title, vec![format!("{title} is a painter from {city}.")]);
    }
}

struct Cluster {
    actor: String,
    character: String,
    series: String,
    city: String,
    year: u32,
}

fn cluster(b: &mut Builder, config: &WikiConfig) -> Cluster {
    let actor = b.person();
    let character = b.person();
    let series = b.series();
    let city = CITIES.choose(&mut b.rng).unwrap().to_string();
    let year = b.rng.gen_range(1975..2020);
    let genre = *GENRES.choose(&mut b.rng).unwrap();
    b.add(
        &actor,
        vec![
            format!("{actor} is an actor born in {city}."),
            format!("{actor} is best known for voicing {character} in the {genre} {series}."),
        ],
    );
    b.add(
        &character,
        vec![
            format!("{character} is a fictional character in {series}."),
            format!("{character} is voiced by {actor}."),
        ],
    );
    b.add(
        &series,
        vec![format!("{series} is a {genre} series that premiered in {year}.")],
    );
    for _ in 0..config.distractors {
        let near = actor.clone();
        b.distractor(&near);
    }
    Cluster {
        actor,
        character,
        series,
        city,
        year,
    }
}

/// Builds a corpus with `count` tasks in total. Equal arguments give equal corpora.
pub fn generate_corpus(seed: u64, count: usize, config: &WikiConfig) -> WikiCorpus {
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed),
        articles: BTreeMap::new(),
        used: BTreeSet::new(),
    };
    let mut qa = Vec::new();
    let mut fever = Vec::new();
    let every = config.fever_every.max(1);
    for i in 0..count.max(1) {
        let c = cluster(&mut b, config);
        if every > 1 && i % every == every - 1 {
            let id = format!("fever-{i:04}");
            let inst = match b.rng.gen_range(0..4) {
                0 => FeverInstance {
                    id,
                    claim: format!("{} was born in {}.", c.actor, c.city),
                    label: FeverLabel::True,
                    supporting_titles: vec![c.actor.clone()],
                    witness: vec![format!("search[{}]", c.actor), "finish[True]".into()],
                },
                1 => {
                    let other = CITIES.iter().find(|x| **x != c.city).unwrap();
                    FeverInstance {
                        id,
                        claim: format!("{} was born in {other}.", c.actor),
                        label: FeverLabel::False,
                        supporting_titles: vec![c.actor.clone()],
                        witness: vec![format!("search[{}]", c.actor), "finish[False]".into()],
                    }
                }
                2 => FeverInstance {
                    id,
                    claim: format!("{} is a character in {}.", c.character, c.series),
                    label: FeverLabel::True,
                    supporting_titles: vec![c.character.clone()],
                    witness: vec![format!("search[{}]", c.character), "finish[True]".into()],
                },
                _ => FeverInstance {
                    id,
                    claim: format!("{} once owned a racehorse.", c.actor),
                    label: FeverLabel::NotClear,
                    supporting_titles: vec![c.actor.clone()],
                    witness: vec![format!("search[{}]", c.actor), "finish[Not Clear]".into()],
                },
            };
            fever.push(inst);
        } else {
            let id = format!("qa-{i:04}");
            let inst = match b.rng.gen_range(0..3) {
                0 => QaInstance {
                    id,
                    question: format!("In which city was the actor who voices {} born?", c.character),
                    answers: vec![c.city.clone()],
                    supporting_titles: vec![c.character.clone(), c.actor.clone()],
                    witness: vec![
                        format!("search[{}]", c.character),
                        format!("search[{}]", c.actor),
                        format!("finish[{}]", c.city),
                    ],
                },
                1 => QaInstance {
                    id,
                    question: format!(
                        "In what year did the series featuring the character voiced by {} premiere?",
                        c.actor
                    ),
                    answers: vec![c.year.to_string()],
                    supporting_titles: vec![c.actor.clone(), c.series.clone()],
                    witness: vec![
                        format!("search[{}]", c.actor),
                        format!("search[{}]", c.series),
                        format!("finish[{}]", c.year),
                    ],
                },
                _ => QaInstance {
                    id,
                    question: format!("Who voices the character {} in {}?", c.character, c.series),
                    answers: vec![c.actor.clone()],
                    supporting_titles: vec![c.character.clone()],
                    witness: vec![
                        format!("search[{}]", c.character),
                        format!("finish[{}]", c.actor),
                    ],
                },
            };
            qa.push(inst);
        }
    }
    WikiCorpus {
        format_version: FORMAT_VERSION.to_string(),
        seed,
        articles: b.articles,
        qa,
        fever,
    }
}
