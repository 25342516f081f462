//! Parse model output into triplets, build a graph, retrieve around task
//! entities and round-trip the text format.

use std::collections::BTreeSet;

use wese::kg::{self, EntityId, RetrievalConfig, RetrievalMode};

fn main() {
    let raw = "\
(Apple 1 | is in | Fridge 1)
(fridge 1 | located in | kitchen)
mug 1 ; on ; countertop 2
(Knife | is on | Countertop 2).
this line is not a triplet
(mug 1 | on | Countertop 2)
";
    let parsed = kg::parse_triplets(raw);
    println!("parsed {} triplets, skipped {} lines", parsed.triplets.len(), parsed.skipped);

    let graph = kg::construct_graph(parsed.triplets);
    println!("{} entities, {} edges", graph.entities().len(), graph.edge_count());

    let task: BTreeSet<EntityId> = ["apple 1", "fridge 1", "kitchen"].iter().map(|e| EntityId::new(e).unwrap()).collect();
    for mode in [RetrievalMode::OneHop, RetrievalMode::Pairwise] {
        let found = RetrievalConfig { mode, cap: None }.retrieve(&graph, &task);
        println!("{mode:?}:");
        for t in found {
            println!("  ({} | {} | {})", t.head, t.relation, t.tail);
        }
    }

    let text = kg::serialize(&graph);
    let back = kg::deserialize(&text).expect("serialized graph parses");
    assert_eq!(back, graph);
    print!("\n{text}");
}
