//! Generate a household world, show a task, then replay its stored witness
//! step by step. Exploration-class actions are marked.
//!
//! Usage: `cargo run --example household_walkthrough [-- SEED]`

use wese::env::{ActionClass, Environment, HouseholdEnv, WorldConfig};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let env = HouseholdEnv::generate(seed, 5, &WorldConfig::default());
    let task = &env.tasks()[0];
    println!("{}: {}", task.id, task.description);

    let (mut session, opening) = env.reset(&task.id).expect("generated task resets");
    println!("{}\n", opening.text);
    for action in env.witness(&task.id).expect("generated task has a witness") {
        let class = match env.classify(&action) {
            Some(ActionClass::Exploration) => "explore",
            Some(ActionClass::Exploitation) => "exploit",
            None => "invalid",
        };
        let fb = session.step(&action).expect("witness actions are well formed");
        println!("[{class}] > {action}\n  {} (reward {})", fb.text, fb.reward);
    }
    println!("\ngoal satisfied: {}", session.goal_satisfied());
}
