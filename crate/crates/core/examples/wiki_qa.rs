//! Multi-hop question answering over a generated article corpus: the
//! search, lookup and finish actions, driven by hand and then by the
//! decoupled agents.

use std::sync::Arc;

use wese::env::wiki::WikiConfig;
use wese::env::{EnvKind, Environment, WikiEnv};
use wese::kg::RetrievalConfig;
use wese::llm::{CostLedger, PriceTable};
use wese::orchestrator::{run_method, Agents, EpisodeOptions, Method, PhaseBudget, PromptSet};
use wese::stubs::rule_backend;

fn main() {
    let env = WikiEnv::generate(5, 4, &WikiConfig::default());
    let task = env.tasks()[0].clone();
    println!("{}: {}\n", task.id, task.description);

    let (mut session, _) = env.reset(&task.id).expect("task resets");
    for action in env.witness(&task.id).expect("task has a witness") {
        let fb = session.step(&action).expect("witness action parses");
        let text: String = fb.text.chars().take(100).collect();
        println!("> {action}\n  {text} (reward {})", fb.reward);
    }

    let ledger = Arc::new(CostLedger::new(PriceTable::default()));
    let agents = Agents::wese(rule_backend(EnvKind::WikiQa, "weak"), rule_backend(EnvKind::WikiQa, "strong"), ledger);
    let r = run_method(
        Method::ReactWese,
        &env,
        &task.id,
        &agents,
        &PromptSet::defaults(EnvKind::WikiQa),
        PhaseBudget::qa(),
        &RetrievalConfig::default(),
        &EpisodeOptions::default(),
    );
    println!("\nagents: success {} after {} exploit steps, plan {:?}", r.success, r.steps(), r.plan.actions);
}
