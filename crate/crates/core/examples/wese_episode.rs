//! One decoupled episode with rule-based weak and strong agents: the explore
//! trajectory, what the graph learned, the retrieved slice, the plan and the
//! per-role cost ledger.

use std::sync::Arc;

use wese::env::{EnvKind, Environment, HouseholdEnv, WorldConfig};
use wese::kg::{self, RetrievalConfig};
use wese::llm::{CostLedger, PriceTable};
use wese::orchestrator::{run_method, Agents, EpisodeOptions, Method, PhaseBudget, PromptSet};
use wese::stubs::rule_backend;

fn main() {
    let env = HouseholdEnv::generate(7, 3, &WorldConfig::default());
    let task = env.tasks()[0].clone();
    let ledger = Arc::new(CostLedger::new(PriceTable::new(0.001, 0.02)));
    let agents = Agents::wese(
        rule_backend(EnvKind::Household, "weak"),
        rule_backend(EnvKind::Household, "strong"),
        ledger.clone(),
    );
    let r = run_method(
        Method::ActWese,
        &env,
        &task.id,
        &agents,
        &PromptSet::defaults(EnvKind::Household),
        PhaseBudget::decision(),
        &RetrievalConfig::default(),
        &EpisodeOptions::default(),
    );

    println!("task: {}", task.description);
    if let Some(ex) = &r.explore {
        println!("explored {} steps ({:?})", ex.len(), ex.terminated_by);
        for s in ex.steps.iter().take(5) {
            println!("  > {}  [+{} triplets]", s.action, s.extracted.len());
        }
    }
    let graph = kg::deserialize(&r.graph).expect("episode graph parses");
    println!("graph: {} entities, {} edges", graph.entities().len(), graph.edge_count());
    println!("task entities: {:?}", r.task_entities);
    for t in &r.retrieved {
        println!("  ({} | {} | {})", t.head, t.relation, t.tail);
    }
    println!("plan: {:?}", r.plan.actions);
    println!("success {} in {} steps", r.success, r.steps());

    let expense = ledger.expense();
    for (role, cents) in &expense.per_role {
        println!("  {:<15} {:>8} tokens  ${:.4}", role.as_str(), ledger.usage(*role).total(), cents.dollars());
    }
    println!("  total ${:.4}", expense.total.dollars());
}
