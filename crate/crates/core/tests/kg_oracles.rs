//! Knowledge-graph behaviour checked against independent re-derivations.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use regex::Regex;
use wese::kg::{
    construct_graph, deserialize, merge_into, parse_triplets, retrieve_one_hop, retrieve_pairwise, serialize,
    EntityId, KnowledgeTriplet,
};

// ---------------------------------------------------------------- parsing

const TRIM: &str = "\"'`()[]{}<>,;:.*-_";

fn oracle_norm(s: &str) -> Option<String> {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
    let n = collapsed
        .trim_matches(|c: char| c.is_whitespace() || TRIM.contains(c))
        .to_lowercase();
    (!n.is_empty() && !n.contains('|')).then_some(n)
}

fn oracle_triple(parts: [&str; 3]) -> Option<(String, String, String)> {
    Some((oracle_norm(parts[0])?, oracle_norm(parts[1])?, oracle_norm(parts[2])?))
}

/// Reference parser written from the grammar with regular expressions.
fn oracle_parse(raw: &str) -> (Vec<(String, String, String)>, usize) {
    let strict = Regex::new(r"^\(([^|]*)\|([^|]*)\|([^|]*)\)$").unwrap();
    let semi = Regex::new(r"^([^;]*);([^;]*);([^;]*)$").unwrap();
    let tail = Regex::new(r"[\s.,;]+$").unwrap();
    let try_strict = |l: &str| {
        strict
            .captures(l)
            .and_then(|c| oracle_triple([c.get(1).unwrap().as_str(), c.get(2).unwrap().as_str(), c.get(3).unwrap().as_str()]))
    };
    let mut out = Vec::new();
    let mut skipped = 0;
    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let found = try_strict(line).or_else(|| {
            let t = tail.replace(line, "");
            try_strict(&t).or_else(|| {
                if t.contains('|') {
                    return None;
                }
                semi.captures(&t).and_then(|c| {
                    oracle_triple([c.get(1).unwrap().as_str(), c.get(2).unwrap().as_str(), c.get(3).unwrap().as_str()])
                })
            })
        });
        match found {
            Some(t) => out.push(t),
            None => skipped += 1,
        }
    }
    (out, skipped)
}

fn fuzz_line() -> impl Strategy<Value = String> {
    let word = prop::sample::select(vec![
        "apple", "Drawer 1", "  is in ", "American Dad!", "Francine  Smith", "voice for", "(x)", "", " ", "a|b", ";", ".",
        "Wendy Schaal", "on", "knife 1", "-", "\"quoted\"",
    ]);
    let fields = prop::collection::vec(word, 1..5);
    (fields, 0..7usize, prop::sample::select(vec!["", ".", " .", ";", ",", "  "])).prop_map(|(f, shape, end)| {
        match shape {
            0 => format!("({}){end}", f.join("|")),
            1 => format!("{}{end}", f.join(";")),
            2 => format!("{}{end}", f.join(" ; ")),
            3 => format!("({} | {} | {})", f[0], f.get(1).copied().unwrap_or("r"), f.last().unwrap()),
            4 => f.join(" "),
            5 => format!("# {}", f.join(" ")),
            _ => String::new(),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn parser_matches_regex_oracle(lines in prop::collection::vec(fuzz_line(), 50)) {
        let raw = lines.join("\n");
        let got = parse_triplets(&raw);
        let (want, skipped) = oracle_parse(&raw);
        let got_tuples: Vec<(String, String, String)> = got
            .triplets
            .iter()
            .map(|t| (t.head.as_str().to_string(), t.relation.clone(), t.tail.as_str().to_string()))
            .collect();
        prop_assert_eq!(got_tuples, want);
        prop_assert_eq!(got.skipped, skipped);
    }
}

#[test]
fn garbage_then_triplet() {
    let p = parse_triplets("garbage line\n(apple | is in | drawer 1)");
    assert_eq!(p.triplets, vec![KnowledgeTriplet::new("apple", "is in", "drawer 1").unwrap()]);
    assert_eq!(p.skipped, 1);
    assert_eq!(oracle_parse("garbage line\n(apple | is in | drawer 1)").1, 1);
}

// ---------------------------------------------------------------- graphs

fn entity_pool() -> Vec<String> {
    (0..8).map(|i| format!("e{i}")).collect()
}

fn triplet_strategy() -> impl Strategy<Value = KnowledgeTriplet> {
    (0..8usize, 0..3usize, 0..8usize)
        .prop_map(|(h, r, t)| KnowledgeTriplet::new(&format!("e{h}"), &format!("r{r}"), &format!("e{t}")).unwrap())
}

fn entity_set() -> impl Strategy<Value = BTreeSet<EntityId>> {
    prop::collection::btree_set(0..8usize, 0..8)
        .prop_map(|s| s.into_iter().map(|i| EntityId::new(&entity_pool()[i]).unwrap()).collect())
}

type Naive = (BTreeSet<String>, BTreeSet<String>, BTreeMap<(String, String), String>);

/// Direct transcription of the construction loop over plain strings.
fn naive_graph(ts: &[KnowledgeTriplet]) -> Naive {
    let mut e = BTreeSet::new();
    let mut r = BTreeSet::new();
    let mut m = BTreeMap::new();
    for t in ts {
        e.insert(t.head.to_string());
        e.insert(t.tail.to_string());
        r.insert(t.relation.clone());
        m.insert((t.head.to_string(), t.tail.to_string()), t.relation.clone());
    }
    (e, r, m)
}

fn observed(g: &wese::kg::KnowledgeGraph) -> Naive {
    (
        g.entities().iter().map(|e| e.to_string()).collect(),
        g.relations().clone(),
        g.adjacency().iter().map(|((h, t), r)| ((h.to_string(), t.to_string()), r.clone())).collect(),
    )
}

fn brute_pairwise(ts: &[KnowledgeTriplet], s: &BTreeSet<EntityId>) -> BTreeSet<KnowledgeTriplet> {
    let (_, _, m) = naive_graph(ts);
    let mut out = BTreeSet::new();
    for a in entity_pool() {
        for b in entity_pool() {
            let (ea, eb) = (EntityId::new(&a).unwrap(), EntityId::new(&b).unwrap());
            if a != b && s.contains(&ea) && s.contains(&eb) {
                if let Some(r) = m.get(&(a.clone(), b.clone())) {
                    out.insert(KnowledgeTriplet::new(&a, r, &b).unwrap());
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn construction_matches_naive_replay(ts in prop::collection::vec(triplet_strategy(), 0..24)) {
        let g = construct_graph(ts.clone());
        prop_assert!(g.validate().is_ok());
        prop_assert_eq!(observed(&g), naive_graph(&ts));
        prop_assert!(g.entities().len() <= 2 * ts.len());
        prop_assert!(g.edge_count() <= ts.len());
    }

    #[test]
    fn pairwise_matches_brute_force(ts in prop::collection::vec(triplet_strategy(), 0..24), s in entity_set()) {
        let g = construct_graph(ts.clone());
        prop_assert_eq!(retrieve_pairwise(&g, &s), brute_pairwise(&ts, &s));
    }

    #[test]
    fn pairwise_is_within_one_hop_and_monotone(
        ts in prop::collection::vec(triplet_strategy(), 0..24),
        s in entity_set(),
        extra in entity_set(),
    ) {
        let g = construct_graph(ts);
        let pair = retrieve_pairwise(&g, &s);
        let hop: BTreeSet<_> = retrieve_one_hop(&g, &s, None).into_iter().collect();
        prop_assert!(pair.is_subset(&hop));
        let bigger: BTreeSet<EntityId> = s.union(&extra).cloned().collect();
        prop_assert!(pair.is_subset(&retrieve_pairwise(&g, &bigger)));
    }

    #[test]
    fn one_hop_is_sorted_incident_edges_then_capped(
        ts in prop::collection::vec(triplet_strategy(), 0..24),
        s in entity_set(),
        cap in 1..6usize,
    ) {
        let g = construct_graph(ts.clone());
        let (_, _, m) = naive_graph(&ts);
        let mut want: Vec<KnowledgeTriplet> = m
            .iter()
            .filter(|((h, t), _)| s.contains(&EntityId::new(h).unwrap()) || s.contains(&EntityId::new(t).unwrap()))
            .map(|((h, t), r)| KnowledgeTriplet::new(h, r, t).unwrap())
            .collect();
        want.sort();
        prop_assert_eq!(retrieve_one_hop(&g, &s, None), want.clone());
        want.truncate(cap);
        prop_assert_eq!(retrieve_one_hop(&g, &s, Some(cap)), want);
    }

    #[test]
    fn merging_batches_equals_one_construction(
        x in prop::collection::vec(triplet_strategy(), 0..16),
        y in prop::collection::vec(triplet_strategy(), 0..16),
    ) {
        let merged = merge_into(construct_graph(x.clone()), y.clone());
        let all: Vec<_> = x.into_iter().chain(y).collect();
        prop_assert_eq!(merged, construct_graph(all));
    }

    #[test]
    fn merging_a_duplicate_is_idempotent(x in prop::collection::vec(triplet_strategy(), 1..16)) {
        let g = construct_graph(x.clone());
        let last = x.last().cloned().unwrap();
        prop_assert_eq!(merge_into(g.clone(), [last]), g);
    }

    #[test]
    fn serialization_round_trips(ts in prop::collection::vec(triplet_strategy(), 0..24)) {
        let g = construct_graph(ts);
        let back = deserialize(&serialize(&g)).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(serialize(&back), serialize(&g));
    }
}

#[test]
fn single_step_merge_equals_batch() {
    let t1 = KnowledgeTriplet::new("a", "r1", "b").unwrap();
    let t2 = KnowledgeTriplet::new("a", "r2", "b").unwrap();
    let g = merge_into(construct_graph([t1.clone()]), [t2.clone()]);
    assert_eq!(g, construct_graph([t1, t2]));
    let a = EntityId::new("a").unwrap();
    let b = EntityId::new("b").unwrap();
    assert_eq!(g.relation(&a, &b), Some("r2"));
}

#[test]
fn retrieval_is_deterministic_across_repeats() {
    let ts: Vec<_> = (0..20)
        .map(|i| KnowledgeTriplet::new(&format!("e{}", i % 7), "r", &format!("e{}", (i * 3) % 8)).unwrap())
        .collect();
    let s: BTreeSet<EntityId> = ["e1", "e3"].iter().map(|e| EntityId::new(e).unwrap()).collect();
    let first = retrieve_one_hop(&construct_graph(ts.clone()), &s, Some(4));
    for _ in 0..50 {
        assert_eq!(retrieve_one_hop(&construct_graph(ts.clone()), &s, Some(4)), first);
    }
}
