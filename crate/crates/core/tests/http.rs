//! The HTTP client against a local stub completions server.
#![cfg(feature = "http")]

use std::sync::Arc;
use std::time::Duration;

use wese::env::{EnvKind, HouseholdEnv, WorldConfig};
use wese::harness::{run_benchmark, RunConfig, RunOptions};
use wese::kg::RetrievalConfig;
use wese::llm::{
    CompletionBackend, CompletionRequest, CostLedger, EndpointConfig, HttpBackend, LlmError, PriceTable, RetryPolicy,
    Role,
};
use wese::orchestrator::{run_method, Agents, EpisodeOptions, Method, PhaseBudget, PromptSet};
use wese::stubs::rule_backend;
use wese::stubs::server::StubServer;

fn fast_retry(max_attempts: u32) -> RetryPolicy {
    RetryPolicy { max_attempts, base_delay: Duration::from_millis(5), max_jitter: Duration::from_millis(1) }
}

fn client(server: &StubServer, model: &str) -> Arc<dyn CompletionBackend> {
    Arc::new(HttpBackend::with_retry(EndpointConfig::new(&server.url(), model), fast_retry(3)).unwrap())
}

#[test]
fn decoupled_episode_over_http_attributes_costs_per_role() {
    let server = StubServer::start(EnvKind::Household).unwrap();
    let env = HouseholdEnv::generate(6, 3, &WorldConfig { rooms: 3, objects: 6, ..WorldConfig::default() });
    let prompts = PromptSet::defaults(EnvKind::Household);
    let task = "household-0000";
    let run = |agents: &Agents| {
        run_method(Method::ActWese, &env, task, agents, &prompts, PhaseBudget::decision(), &RetrievalConfig::default(), &EpisodeOptions::default())
    };
    let ledger = Arc::new(CostLedger::new(PriceTable::new(0.001, 0.02)));
    let remote = run(&Agents::wese(client(&server, "weak-model"), client(&server, "strong-model"), ledger.clone()));
    let local = run(&Agents::wese(
        rule_backend(EnvKind::Household, "w"),
        rule_backend(EnvKind::Household, "s"),
        Arc::new(CostLedger::new(PriceTable::default())),
    ));
    assert!(remote.error.is_none(), "{:?}", remote.error);
    assert_eq!(remote.plan, local.plan);
    assert_eq!(remote.success, local.success);

    let snap = ledger.snapshot();
    let count = |role: Role| snap.events.iter().filter(|e| e.role == role).count();
    let calls = server.calls();
    assert_eq!(calls["weak-model"], count(Role::WeakExplore) + count(Role::Extraction));
    assert_eq!(calls["strong-model"], count(Role::StrongExploit));
    assert_eq!(count(Role::StrongExplore), 0);
    assert!(snap.usage_for(Role::WeakExplore).total() > 0);
    assert!(snap.usage_for(Role::StrongExploit).total() > 0);
    // the ledger prices each role at its own rate
    let weak_tokens = (snap.usage_for(Role::WeakExplore) + snap.usage_for(Role::Extraction)).total() as f64;
    let strong_tokens = snap.usage_for(Role::StrongExploit).total() as f64;
    let expected = weak_tokens / 1000.0 * 0.001 + strong_tokens / 1000.0 * 0.02;
    assert!((wese::harness::expense_dollars(&remote) - expected).abs() < 1e-12);
}

#[test]
fn transient_failures_are_retried() {
    let server = StubServer::start(EnvKind::Household).unwrap();
    let backend = client(&server, "m");
    let request = CompletionRequest::new("# extract\nObservation: You see a mug 1.\nTriplets:", 32).unwrap();
    server.fail_next(2);
    assert!(backend.complete(&request).is_ok());
    server.fail_next(5);
    match backend.complete(&request) {
        Err(LlmError::Http { status: 503, .. }) => {}
        other => panic!("expected a 503 after retries, got {other:?}"),
    }
    server.fail_next(0);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let url = {
        let server = StubServer::start(EnvKind::Household).unwrap();
        server.url()
    };
    let backend = HttpBackend::with_retry(EndpointConfig::new(&url, "m"), fast_retry(1)).unwrap();
    let err = backend.complete(&CompletionRequest::new("hello", 4).unwrap()).unwrap_err();
    assert!(matches!(err, LlmError::Transport { .. }), "{err:?}");
}

#[test]
fn benchmark_runs_against_endpoints_from_config() {
    let server = StubServer::start(EnvKind::WikiQa).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "method = \"react-wese\"\n[environment.generate]\nkind = \"wiki-qa\"\nseed = 1\ncount = 4\n\
         [backends.weak]\nendpoint = \"{0}\"\nmodel = \"small\"\n[backends.strong]\nendpoint = \"{0}\"\nmodel = \"large\"\n",
        server.url()
    );
    let cfg = RunConfig::parse(&text, tmp.path()).unwrap();
    let report = run_benchmark(&cfg, &RunOptions { out: Some(tmp.path().join("run")), workers: Some(2), resume: false }).unwrap();
    assert_eq!(report.tasks.len(), 4);
    assert!(report.tasks.iter().all(|t| t.error.is_none()));
    let calls = server.calls();
    assert_eq!(calls.values().sum::<usize>(), report.stats.backend_calls);
    assert!(calls["small"] > 0 && calls["large"] > 0);
}
