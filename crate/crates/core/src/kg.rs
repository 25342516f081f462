//! Knowledge-graph memory.
//!
//! Exploration feedback is compressed into `(head | relation | tail)` triplets,
//! folded into a directed graph that keeps a single relation per ordered entity
//! pair, and queried either by one-hop neighbourhood or by pairwise edges
//! between task entities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Characters trimmed from both ends of an entity or relation mention.
///
/// `!` and `?` are kept because they occur inside titles ("American Dad!").
const TRIM_PUNCT: &[char] = &[
    '"', '\'', '`', '(', ')', '[', ']', '{', '}', '<', '>', ',', ';', ':', '.', '*', '-', '_',
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KgError {
    #[error("mention {0:?} is empty after normalization")]
    EmptyMention(String),
    #[error("mention {0:?} contains the reserved field separator '|'")]
    ReservedSeparator(String),
    #[error("graph text line {line}: cannot parse {content:?}")]
    Parse { line: usize, content: String },
}

/// Lower-cases, collapses internal whitespace and strips surrounding punctuation.
pub fn normalize_mention(raw: &str) -> String {
    let collapsed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| c.is_whitespace() || TRIM_PUNCT.contains(&c))
        .to_lowercase()
}

fn checked_mention(raw: &str) -> Result<String, KgError> {
    let norm = normalize_mention(raw);
    if norm.is_empty() {
        return Err(KgError::EmptyMention(raw.to_string()));
    }
    if norm.contains('|') {
        return Err(KgError::ReservedSeparator(raw.to_string()));
    }
    Ok(norm)
}

/// A normalized entity name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EntityId(String);

impl EntityId {
    pub fn new(raw: &str) -> Result<Self, KgError> {
        checked_mention(raw).map(EntityId)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for EntityId {
    type Error = KgError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        EntityId::new(&value)
    }
}

impl From<EntityId> for String {
    fn from(value: EntityId) -> Self {
        value.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A directed `<head, relation, tail>` fact. Ordering is lexicographic on
/// `(head, relation, tail)`, which is the retrieval order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KnowledgeTriplet {
    pub head: EntityId,
    pub relation: String,
    pub tail: EntityId,
}

impl KnowledgeTriplet {
    pub fn new(head: &str, relation: &str, tail: &str) -> Result<Self, KgError> {
        Ok(KnowledgeTriplet {
            head: EntityId::new(head)?,
            relation: checked_mention(relation)?,
            tail: EntityId::new(tail)?,
        })
    }

    pub fn is_self_loop(&self) -> bool {
        self.head == self.tail
    }
}

impl fmt::Display for KnowledgeTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} | {} | {})", self.head, self.relation, self.tail)
    }
}

/// Result of [`parse_triplets`]: the triplets in input order plus the number of
/// non-blank lines that matched neither grammar.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedTriplets {
    pub triplets: Vec<KnowledgeTriplet>,
    pub skipped: usize,
}

fn split_fields(body: &str, sep: char) -> Option<KnowledgeTriplet> {
    let fields: Vec<&str> = body.split(sep).collect();
    if fields.len() != 3 {
        return None;
    }
    KnowledgeTriplet::new(fields[0], fields[1], fields[2]).ok()
}

fn parse_strict(line: &str) -> Option<KnowledgeTriplet> {
    let body = line.strip_prefix('(')?.strip_suffix(')')?;
    split_fields(body, '|')
}

fn parse_lenient(line: &str) -> Option<KnowledgeTriplet> {
    let trimmed = line.trim_end_matches(|c: char| c.is_whitespace() || matches!(c, '.' | ',' | ';'));
    if let Some(t) = parse_strict(trimmed) {
        return Some(t);
    }
    if trimmed.contains('|') {
        return None;
    }
    split_fields(trimmed, ';')
}

/// Parses extractor output into triplets.
///
/// The strict form is one `(head | relation | tail)` per line. Lines that fail
/// it are retried with the lenient form, which also accepts `head ; relation ;
/// tail` and trailing punctuation. Blank lines and `#` comments are ignored;
/// anything else that fails both forms is skipped and counted.
pub fn parse_triplets(raw: &str) -> ParsedTriplets {
    let mut out = ParsedTriplets::default();
    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_strict(line).or_else(|| parse_lenient(line)) {
            Some(t) => {
                if t.is_self_loop() {
                    tracing::debug!(triplet = %t, "self-loop triplet");
                }
                out.triplets.push(t);
            }
            None => out.skipped += 1,
        }
    }
    out
}

/// Directed knowledge graph with at most one relation per ordered entity pair.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeGraph {
    entities: BTreeSet<EntityId>,
    relations: BTreeSet<String>,
    adjacency: BTreeMap<(EntityId, EntityId), String>,
    /// One overwritten edge per relation that no longer labels any cell, kept
    /// so that serialization reproduces the relation set.
    displaced: BTreeMap<String, (EntityId, EntityId)>,
}

impl PartialEq for KnowledgeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.relations == other.relations
            && self.adjacency == other.adjacency
    }
}

impl Eq for KnowledgeGraph {}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entities(&self) -> &BTreeSet<EntityId> {
        &self.entities
    }

    pub fn relations(&self) -> &BTreeSet<String> {
        &self.relations
    }

    pub fn adjacency(&self) -> &BTreeMap<(EntityId, EntityId), String> {
        &self.adjacency
    }

    pub fn relation(&self, head: &EntityId, tail: &EntityId) -> Option<&str> {
        self.adjacency
            .get(&(head.clone(), tail.clone()))
            .map(String::as_str)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// The current edges as triplets, ordered by `(head, tail)`.
    pub fn triplets(&self) -> Vec<KnowledgeTriplet> {
        self.adjacency
            .iter()
            .map(|((h, t), r)| KnowledgeTriplet {
                head: h.clone(),
                relation: r.clone(),
                tail: t.clone(),
            })
            .collect()
    }

    /// Inserts one triplet; a later relation on the same ordered pair replaces
    /// the earlier one.
    pub fn insert(&mut self, triplet: KnowledgeTriplet) {
        let KnowledgeTriplet { head, relation, tail } = triplet;
        self.entities.insert(head.clone());
        self.entities.insert(tail.clone());
        self.relations.insert(relation.clone());
        let key = (head, tail);
        if let Some(previous) = self.adjacency.insert(key.clone(), relation.clone()) {
            if previous != relation {
                tracing::warn!(
                    head = %key.0, tail = %key.1, old = %previous, new = %relation,
                    "relation overwritten on existing entity pair"
                );
                self.displaced.entry(previous).or_insert(key);
            }
        }
        self.displaced.remove(&relation);
        self.debug_check();
    }

    /// Triplets whose replay through [`construct_graph`] rebuilds this graph:
    /// displaced edges first, current edges after.
    fn replay_triplets(&self) -> Vec<KnowledgeTriplet> {
        let live: BTreeSet<&String> = self.adjacency.values().collect();
        let mut out: Vec<KnowledgeTriplet> = self
            .displaced
            .iter()
            .filter(|(r, _)| !live.contains(r))
            .map(|(r, (h, t))| KnowledgeTriplet {
                head: h.clone(),
                relation: r.clone(),
                tail: t.clone(),
            })
            .collect();
        out.extend(self.triplets());
        out
    }

    /// Checks the structural invariants; returns the first violation found.
    pub fn validate(&self) -> Result<(), String> {
        for ((h, t), r) in &self.adjacency {
            if !self.entities.contains(h) || !self.entities.contains(t) {
                return Err(format!("edge ({h}, {t}) references an unknown entity"));
            }
            if !self.relations.contains(r) {
                return Err(format!("edge ({h}, {t}) carries unknown relation {r:?}"));
            }
        }
        Ok(())
    }

    #[inline]
    fn debug_check(&self) {
        debug_assert!(self.validate().is_ok(), "{:?}", self.validate());
    }
}

/// Builds a graph from triplets in order: entities and relations are unions,
/// and each triplet assigns its relation to the `(head, tail)` cell.
pub fn construct_graph<I>(triplets: I) -> KnowledgeGraph
where
    I: IntoIterator<Item = KnowledgeTriplet>,
{
    let mut graph = KnowledgeGraph::new();
    for t in triplets {
        graph.insert(t);
    }
    graph
}

/// Folds new triplets into an existing graph. Equivalent to rebuilding from
/// the graph's triplets followed by `triplets`.
pub fn merge_into<I>(mut graph: KnowledgeGraph, triplets: I) -> KnowledgeGraph
where
    I: IntoIterator<Item = KnowledgeTriplet>,
{
    for t in triplets {
        graph.insert(t);
    }
    graph
}

/// Edges between distinct task entities, in both directions.
pub fn retrieve_pairwise(
    graph: &KnowledgeGraph,
    task_entities: &BTreeSet<EntityId>,
) -> BTreeSet<KnowledgeTriplet> {
    let mut out = BTreeSet::new();
    for ei in task_entities {
        for ej in task_entities {
            if ei == ej {
                continue;
            }
            if let Some(r) = graph.relation(ei, ej) {
                out.insert(KnowledgeTriplet {
                    head: ei.clone(),
                    relation: r.to_string(),
                    tail: ej.clone(),
                });
            }
        }
    }
    out
}

/// Every edge incident to a task entity, sorted by `(head, relation, tail)`
/// and truncated to `cap` when one is given.
pub fn retrieve_one_hop(
    graph: &KnowledgeGraph,
    task_entities: &BTreeSet<EntityId>,
    cap: Option<usize>,
) -> Vec<KnowledgeTriplet> {
    let found: BTreeSet<KnowledgeTriplet> = graph
        .adjacency
        .iter()
        .filter(|((h, t), _)| task_entities.contains(h) || task_entities.contains(t))
        .map(|((h, t), r)| KnowledgeTriplet {
            head: h.clone(),
            relation: r.clone(),
            tail: t.clone(),
        })
        .collect();
    let limit = cap.unwrap_or(usize::MAX);
    found.into_iter().take(limit).collect()
}

/// Which retrieval routine feeds the exploitation prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RetrievalMode {
    #[default]
    OneHop,
    Pairwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct RetrievalConfig {
    #[serde(default)]
    pub mode: RetrievalMode,
    #[serde(default)]
    pub cap: Option<usize>,
}

impl RetrievalConfig {
    pub fn retrieve(
        &self,
        graph: &KnowledgeGraph,
        task_entities: &BTreeSet<EntityId>,
    ) -> Vec<KnowledgeTriplet> {
        match self.mode {
            RetrievalMode::OneHop => retrieve_one_hop(graph, task_entities, self.cap),
            RetrievalMode::Pairwise => {
                let all = retrieve_pairwise(graph, task_entities).into_iter();
                match self.cap {
                    Some(cap) => all.take(cap).collect(),
                    None => all.collect(),
                }
            }
        }
    }
}

const GRAPH_HEADER: &str = "# knowledge graph v1";

/// Writes the graph in the line-oriented triplet format.
pub fn serialize(graph: &KnowledgeGraph) -> String {
    let mut out = String::from(GRAPH_HEADER);
    out.push('\n');
    for t in graph.replay_triplets() {
        out.push_str(&t.to_string());
        out.push('\n');
    }
    out
}

/// Reads text produced by [`serialize`]. Every non-blank, non-comment line must
/// be a strict `(head | relation | tail)` triplet.
pub fn deserialize(text: &str) -> Result<KnowledgeGraph, KgError> {
    let mut graph = KnowledgeGraph::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let t = parse_strict(trimmed).ok_or_else(|| KgError::Parse {
            line: idx + 1,
            content: line.to_string(),
        })?;
        graph.insert(t);
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: &str, r: &str, tl: &str) -> KnowledgeTriplet {
        KnowledgeTriplet::new(h, r, tl).unwrap()
    }

    fn ents(names: &[&str]) -> BTreeSet<EntityId> {
        names.iter().map(|n| EntityId::new(n).unwrap()).collect()
    }

    fn wendy() -> Vec<KnowledgeTriplet> {
        parse_triplets(
            "(Wendy Schaal | voice for | Francine Smith)\n(Francine Smith | character in | American Dad!)",
        )
        .triplets
    }

    #[test]
    fn normalization_joins_case_and_whitespace_variants() {
        assert_eq!(EntityId::new("  Drawer   1 ").unwrap(), EntityId::new("drawer 1").unwrap());
        assert_eq!(EntityId::new("\"Apple\",").unwrap().as_str(), "apple");
        assert_eq!(EntityId::new("American Dad!").unwrap().as_str(), "american dad!");
        assert!(matches!(EntityId::new(" ., "), Err(KgError::EmptyMention(_))));
        assert!(matches!(EntityId::new("a|b"), Err(KgError::ReservedSeparator(_))));
    }

    #[test]
    fn parses_the_wendy_schaal_lines() {
        let got = wendy();
        assert_eq!(
            got,
            vec![
                t("wendy schaal", "voice for", "francine smith"),
                t("francine smith", "character in", "american dad!"),
            ]
        );
    }

    #[test]
    fn empty_input_parses_to_nothing() {
        assert_eq!(parse_triplets(""), ParsedTriplets::default());
    }

    #[test]
    fn garbage_lines_are_counted() {
        let got = parse_triplets("garbage line\n(apple | is in | drawer 1)");
        assert_eq!(got.triplets, vec![t("apple", "is in", "drawer 1")]);
        assert_eq!(got.skipped, 1);
    }

    #[test]
    fn lenient_forms() {
        let got = parse_triplets("apple ; is in ; drawer 1.\n(mug 1 | is on | shelf 2).\n(a | b)\n( | x | y)");
        assert_eq!(
            got.triplets,
            vec![t("apple", "is in", "drawer 1"), t("mug 1", "is on", "shelf 2")]
        );
        assert_eq!(got.skipped, 2);
    }

    #[test]
    fn duplicates_and_self_loops_are_kept() {
        let got = parse_triplets("(a | r | a)\n(a | r | a)");
        assert_eq!(got.triplets.len(), 2);
        assert!(got.triplets[0].is_self_loop());
    }

    #[test]
    fn construct_empty() {
        let g = construct_graph(Vec::new());
        assert!(g.entities().is_empty() && g.relations().is_empty() && g.adjacency().is_empty());
    }

    #[test]
    fn construct_wendy_graph() {
        let g = construct_graph(wendy());
        assert_eq!(g.entities(), &ents(&["wendy schaal", "francine smith", "american dad!"]));
        assert_eq!(
            g.relations().iter().cloned().collect::<Vec<_>>(),
            vec!["character in".to_string(), "voice for".to_string()]
        );
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn last_write_wins_but_relation_set_keeps_both() {
        let g = construct_graph(vec![t("a", "r1", "b"), t("a", "r2", "b")]);
        let a = EntityId::new("a").unwrap();
        let b = EntityId::new("b").unwrap();
        assert_eq!(g.relation(&a, &b), Some("r2"));
        assert_eq!(g.relations().len(), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn merge_identities() {
        let x = wendy();
        assert_eq!(merge_into(KnowledgeGraph::new(), x.clone()), construct_graph(x.clone()));
        let g = construct_graph(x);
        assert_eq!(merge_into(g.clone(), Vec::new()), g);
    }

    #[test]
    fn pairwise_on_wendy_graph() {
        let g = construct_graph(wendy());
        assert!(retrieve_pairwise(&g, &BTreeSet::new()).is_empty());
        let got = retrieve_pairwise(&g, &ents(&["wendy schaal", "francine smith"]));
        assert_eq!(
            got.into_iter().collect::<Vec<_>>(),
            vec![t("wendy schaal", "voice for", "francine smith")]
        );
    }

    #[test]
    fn one_hop_on_wendy_graph() {
        let g = construct_graph(wendy());
        let got = retrieve_one_hop(&g, &ents(&["francine smith"]), None);
        assert_eq!(
            got,
            vec![
                t("francine smith", "character in", "american dad!"),
                t("wendy schaal", "voice for", "francine smith"),
            ]
        );
        assert!(retrieve_one_hop(&g, &ents(&["bob"]), None).is_empty());
        let capped = retrieve_one_hop(&g, &ents(&["francine smith"]), Some(1));
        assert_eq!(capped, vec![t("francine smith", "character in", "american dad!")]);
    }

    #[test]
    fn serialize_round_trips() {
        let empty = KnowledgeGraph::new();
        assert_eq!(deserialize(&serialize(&empty)).unwrap(), empty);

        let g = construct_graph(wendy());
        let back = deserialize(&serialize(&g)).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.entities().len(), 3);
        assert_eq!(back.edge_count(), 2);

        let overwritten = construct_graph(vec![t("a", "r1", "b"), t("a", "r2", "b")]);
        assert_eq!(deserialize(&serialize(&overwritten)).unwrap(), overwritten);
    }

    #[test]
    fn deserialize_names_the_bad_line() {
        let err = deserialize("# header\n(a | r | b)\nnot a triplet\n").unwrap_err();
        assert_eq!(
            err,
            KgError::Parse {
                line: 3,
                content: "not a triplet".into()
            }
        );
    }

    #[test]
    fn pairwise_mode_respects_cap() {
        let g = construct_graph(vec![t("a", "r", "b"), t("b", "r", "a"), t("a", "r", "c")]);
        let cfg = RetrievalConfig {
            mode: RetrievalMode::Pairwise,
            cap: Some(2),
        };
        let got = cfg.retrieve(&g, &ents(&["a", "b", "c"]));
        assert_eq!(got, vec![t("a", "r", "b"), t("a", "r", "c")]);
    }
}
