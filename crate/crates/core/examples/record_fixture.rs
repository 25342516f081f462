//! Records a replayable decoupled episode on a miniature household world:
//! a world file, per-role transcripts and a run config, ready for
//! `wese run --config <dir>/config.toml`.
//!
//! Usage: `cargo run --example record_fixture [-- OUT_DIR]`
//! (defaults to `fixtures/household_fixture` under the crate).

use std::path::PathBuf;
use std::sync::Arc;

use wese::env::household::TaskTemplate;
use wese::env::{EnvKind, HouseholdEnv, WorldConfig};
use wese::kg::RetrievalConfig;
use wese::llm::{CostLedger, PriceTable, RecordingBackend};
use wese::orchestrator::{run_method, Agents, EpisodeOptions, Method, PhaseBudget, PromptSet};
use wese::stubs::rule_backend;

const CONFIG: &str = r#"method = "act-wese"

[environment]
world = "world.json"

[backends.weak]
transcripts = "transcripts/weak"

[backends.strong]
transcripts = "transcripts/strong"

[budgets]
n_explore = 50
n_exploit = 50
"#;

fn main() {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/household_fixture"));
    let config = WorldConfig {
        rooms: 3,
        objects: 6,
        receptacles_per_room: (2, 3),
        ..WorldConfig::default()
    };
    let prompts = PromptSet::defaults(EnvKind::Household);
    for seed in 0..500u64 {
        let env = HouseholdEnv::generate(seed, 8, &config);
        for task in env.world().tasks.clone() {
            // put from a closed receptacle onto an open one: go, open, take, go, put
            if task.template != TaskTemplate::Put || task.witness.len() != 5 {
                continue;
            }
            let weak = Arc::new(RecordingBackend::new(rule_backend(EnvKind::Household, "weak")));
            let strong = Arc::new(RecordingBackend::new(rule_backend(EnvKind::Household, "strong")));
            let ledger = Arc::new(CostLedger::new(PriceTable::default()));
            let agents = Agents::wese(weak.clone(), strong.clone(), ledger);
            let result = run_method(
                Method::ActWese,
                &env,
                &task.id,
                &agents,
                &prompts,
                PhaseBudget::decision(),
                &RetrievalConfig::default(),
                &EpisodeOptions::default(),
            );
            if !result.success || result.plan.len() != 5 {
                continue;
            }
            let mut world = env.world().clone();
            world.tasks.retain(|t| t.id == task.id);
            std::fs::create_dir_all(out.join("transcripts/weak")).unwrap();
            std::fs::create_dir_all(out.join("transcripts/strong")).unwrap();
            std::fs::write(out.join("world.json"), world.to_json()).unwrap();
            let file = format!("{}.jsonl", task.id);
            weak.transcript().save(&out.join("transcripts/weak").join(&file)).unwrap();
            strong.transcript().save(&out.join("transcripts/strong").join(&file)).unwrap();
            std::fs::write(out.join("config.toml"), CONFIG).unwrap();
            println!(
                "seed {seed} {}: {} explore steps, plan {:?}",
                task.id,
                result.explore.as_ref().map_or(0, |t| t.len()),
                result.plan.actions
            );
            println!("wrote {}", out.display());
            return;
        }
    }
    eprintln!("no suitable task found");
    std::process::exit(1);
}
