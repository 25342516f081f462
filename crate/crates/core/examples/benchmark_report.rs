//! Run three methods over the same generated suite with stub backends, then
//! collect the run directories into one comparison table.
//!
//! Usage: `cargo run --example benchmark_report [-- OUT_DIR]`

use std::path::PathBuf;

use wese::harness::{collect_table, run_benchmark, RunConfig, RunOptions};

fn main() {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("wese-benchmark"));
    for method in ["act", "act-wese", "act-sese"] {
        let text = format!(
            "method = \"{method}\"\n[environment.generate]\nkind = \"household\"\nseed = 4\ncount = 20\n\
             [backends.weak]\nstub = true\n[backends.strong]\nstub = true\n"
        );
        let cfg = RunConfig::parse(&text, &out).expect("config parses");
        let opts = RunOptions { out: Some(out.join(method)), workers: None, resume: false };
        let report = run_benchmark(&cfg, &opts).expect("run completes");
        println!("{method}: {} tasks, {} calls", report.tasks.len(), report.stats.backend_calls);
    }
    let table = collect_table(&out).expect("runs collect");
    println!("\n{}", table.render_table());
}
