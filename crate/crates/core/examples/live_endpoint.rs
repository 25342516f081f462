//! Point the HTTP client at a completions endpoint. Without an argument a
//! local stub server is started; otherwise the argument is used as the URL
//! for both roles.
//!
//! Usage: `cargo run --example live_endpoint [-- URL]`

use std::sync::Arc;

use wese::env::{EnvKind, Environment, HouseholdEnv, WorldConfig};
use wese::kg::RetrievalConfig;
use wese::llm::{CompletionBackend, CostLedger, EndpointConfig, HttpBackend, PriceTable};
use wese::orchestrator::{run_method, Agents, EpisodeOptions, Method, PhaseBudget, PromptSet};
use wese::stubs::server::StubServer;

fn main() {
    let (url, server) = match std::env::args().nth(1) {
        Some(url) => (url, None),
        None => {
            let s = StubServer::start(EnvKind::Household).expect("bind a local port");
            (s.url(), Some(s))
        }
    };
    let client = |model: &str| -> Arc<dyn CompletionBackend> {
        Arc::new(HttpBackend::new(EndpointConfig::new(&url, model)).expect("client builds"))
    };
    let env = HouseholdEnv::generate(2, 2, &WorldConfig::default());
    let task = env.tasks()[0].clone();
    let ledger = Arc::new(CostLedger::new(PriceTable::new(0.001, 0.02)));
    let agents = Agents::wese(client("weak-model"), client("strong-model"), ledger.clone());
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
    if let Some(e) = &r.error {
        eprintln!("episode error: {e}");
    }
    println!("{}: success {} in {} steps, {} calls, ${:.4}", task.id, r.success, r.steps(), ledger.call_count(), ledger.expense().total.dollars());
    if let Some(s) = server {
        println!("requests by model: {:?}", s.calls());
    }
}
