//! Rule-based explorer and planner on a seeded household suite: the
//! decoupled pipeline against the coupled baseline at equal step budgets,
//! in a world with many receptacles per room.
//!
//! Usage: `cargo run --example knowledge_shortcut [-- SEED]`

use std::sync::Arc;

use wese::env::{EnvKind, Environment, HouseholdEnv, WorldConfig};
use wese::llm::{CostLedger, PriceTable};
use wese::kg::RetrievalConfig;
use wese::orchestrator::{run_method, Agents, EpisodeOptions, Method, PhaseBudget, PromptSet};
use wese::stubs::rule_backend;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(11);
    let env = HouseholdEnv::generate(seed, 50, &WorldConfig::cluttered());
    let prompts = PromptSet::defaults(EnvKind::Household);
    let budget = PhaseBudget::decision();
    let opts = EpisodeOptions::default();
    let weak = rule_backend(EnvKind::Household, "weak-stub");
    let strong = rule_backend(EnvKind::Household, "strong-stub");
    for method in [Method::Act, Method::ActWese] {
        let (mut ok, mut steps, mut explore) = (0, 0, 0);
        for task in env.tasks() {
            let ledger = Arc::new(CostLedger::new(PriceTable::default()));
            let agents = if method.decoupled() {
                Agents::wese(weak.clone(), strong.clone(), ledger)
            } else {
                Agents::single(strong.clone(), ledger)
            };
            let r = run_method(method, &env, &task.id, &agents, &prompts, budget, &RetrievalConfig::default(), &opts);
            explore += r.explore.as_ref().map_or(0, |t| t.len());
            if r.success {
                ok += 1;
                steps += r.steps();
            }
        }
        let n = env.tasks().len();
        println!(
            "{:<10} SR {:.2}  AS {:.2}  explore steps/task {:.1}",
            method.label(),
            ok as f64 / n as f64,
            steps as f64 / ok.max(1) as f64,
            explore as f64 / n as f64
        );
    }
}
