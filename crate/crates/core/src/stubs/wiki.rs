//! Wiki stubs. The explorer searches capitalized names; the extractor and
//! planner know the sentence shapes of the generated corpus.

use std::collections::{BTreeMap, BTreeSet};

use super::{entity_request, extract_observation, mentioned, PromptView};
use crate::kg::KnowledgeTriplet;
use crate::orchestrator::DONE_EXPLORING;

const QUESTION_WORDS: [&str; 8] = ["Who", "What", "Which", "In", "When", "Where", "How", "Is"];

/// Maximal runs of capitalized words, skipping a leading question word.
pub fn capitalized_spans(text: &str) -> Vec<String> {
    let mut spans = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let words: Vec<&str> = text.split_whitespace().collect();
    for (i, raw) in words.iter().enumerate() {
        let word = raw.trim_end_matches(['.', ',', '?', ';', ':']);
        let ends = word.len() != raw.len() && !raw.ends_with("!.");
        let cap = word.chars().next().is_some_and(|c| c.is_uppercase())
            && !(i == 0 && QUESTION_WORDS.contains(&word));
        if cap {
            current.push(word);
        }
        if !cap || ends {
            if !current.is_empty() {
                spans.push(current.join(" "));
                current.clear();
            }
        }
    }
    if !current.is_empty() {
        spans.push(current.join(" "));
    }
    let mut seen = BTreeSet::new();
    spans.retain(|s| seen.insert(s.clone()));
    spans
}

fn rel(out: &mut Vec<KnowledgeTriplet>, h: &str, r: &str, t: &str) {
    if let Ok(tr) = KnowledgeTriplet::new(h, r, t) {
        out.push(tr);
    }
}

fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, c) in chars.iter().enumerate() {
        cur.push(*c);
        if *c == '.' && chars.get(i + 1).is_none_or(|n| n.is_whitespace()) {
            out.push(cur.trim().to_string());
            cur.clear();
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// Triplets for the sentence shapes of the generated corpus.
pub fn extract_from(text: &str) -> Vec<KnowledgeTriplet> {
    let mut out = Vec::new();
    for s in split_sentences(text) {
        let s = s.strip_suffix('.').unwrap_or(&s);
        if let Some((a, city)) = s.split_once(" is an actor born in ") {
            rel(&mut out, a, "born in", city);
        } else if let Some((a, rest)) = s.split_once(" is best known for voicing ") {
            if let Some((c, tail)) = rest.split_once(" in the ") {
                rel(&mut out, a, "voice for", c);
                if let Some(series) = tail.find("The ").map(|i| &tail[i..]) {
                    rel(&mut out, c, "character in", series);
                }
            }
        } else if let Some((c, series)) = s.split_once(" is a fictional character in ") {
            rel(&mut out, c, "character in", series);
        } else if let Some((c, a)) = s.split_once(" is voiced by ") {
            rel(&mut out, a, "voice for", c);
        } else if let Some((series, rest)) = s.split_once(" series that premiered in ") {
            if let Some((name, _)) = series.split_once(" is a") {
                rel(&mut out, name, "premiered in", rest);
            }
        } else if let Some((p, city)) = s.split_once(" is a painter from ") {
            rel(&mut out, p, "painter from", city);
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

pub fn entities(prompt: &str) -> String {
    let (task, inventory) = entity_request(prompt);
    mentioned(&task, &inventory).join(", ")
}

fn searched(view: &PromptView) -> BTreeSet<String> {
    view.steps
        .iter()
        .filter_map(|(a, _)| a.strip_prefix("search[").and_then(|r| r.strip_suffix(']')))
        .map(|s| s.to_lowercase())
        .collect()
}

/// Searches every name in the question, then names found on opened pages.
pub fn explore(prompt: &str) -> String {
    let view = PromptView::parse(prompt);
    let done = searched(&view);
    let mut candidates = capitalized_spans(&view.task);
    for (_, fb) in &view.steps {
        if !fb.starts_with("Could not find") {
            candidates.extend(capitalized_spans(fb));
        }
    }
    candidates
        .into_iter()
        .find(|c| !done.contains(&c.to_lowercase()))
        .map(|c| format!("search[{c}]"))
        .unwrap_or_else(|| DONE_EXPLORING.to_string())
}

/// Known facts as `(head, relation) -> tail`, lower-cased.
fn facts(view: &PromptView) -> BTreeMap<(String, String), String> {
    let mut known = BTreeMap::new();
    let mut all = view.knowledge.clone();
    for (_, fb) in &view.steps {
        all.extend(extract_from(fb));
    }
    for t in all {
        known.insert((t.head.as_str().to_string(), t.relation.clone()), t.tail.as_str().to_string());
        if t.relation == "voice for" {
            known.insert((t.tail.as_str().to_string(), "voiced by".into()), t.head.as_str().to_string());
        }
    }
    known
}

fn between<'a>(s: &'a str, start: &str, end: &str) -> Option<&'a str> {
    let rest = s.strip_prefix(start)?;
    rest.strip_suffix(end)
}

/// Planner for the generated question and claim shapes.
pub fn plan(prompt: &str) -> String {
    let view = PromptView::parse(prompt);
    let known = facts(&view);
    let get = |h: &str, r: &str| known.get(&(h.to_lowercase(), r.to_string())).cloned();
    let done = searched(&view);
    let search = |name: &str| -> String {
        if done.contains(&name.to_lowercase()) {
            "finish[Not Clear]".to_string()
        } else {
            format!("search[{name}]")
        }
    };
    let q = view.task.trim();
    if let Some(c) = between(q, "In which city was the actor who voices ", " born?") {
        return match get(c, "voiced by") {
            Some(a) => match get(&a, "born in") {
                Some(city) => format!("finish[{city}]"),
                None => search(&a),
            },
            None => search(c),
        };
    }
    if let Some(a) = between(
        q,
        "In what year did the series featuring the character voiced by ",
        " premiere?",
    ) {
        let series = get(a, "voice for").and_then(|c| get(&c, "character in"));
        return match series {
            Some(s) => match get(&s, "premiered in") {
                Some(y) => format!("finish[{y}]"),
                None => search(&s),
            },
            None => search(a),
        };
    }
    if let Some(rest) = between(q, "Who voices the character ", "?") {
        let c = rest.split(" in The ").next().unwrap_or(rest);
        return match get(c, "voiced by") {
            Some(a) => format!("finish[{a}]"),
            None => search(c),
        };
    }
    if let Some((a, city)) = between(q, "", ".").and_then(|s| s.split_once(" was born in ")) {
        return match get(a, "born in") {
            Some(real) => {
                let verdict = if real.eq_ignore_ascii_case(city) { "True" } else { "False" };
                format!("finish[{verdict}]")
            }
            None => search(a),
        };
    }
    if let Some((c, s)) = between(q, "", ".").and_then(|x| x.split_once(" is a character in ")) {
        return match get(c, "character in") {
            Some(real) => {
                let verdict = if real.eq_ignore_ascii_case(s) { "True" } else { "False" };
                format!("finish[{verdict}]")
            }
            None => search(c),
        };
    }
    match capitalized_spans(q).into_iter().find(|c| !done.contains(&c.to_lowercase())) {
        Some(c) => format!("search[{c}]"),
        None => "finish[Not Clear]".to_string(),
    }
}
