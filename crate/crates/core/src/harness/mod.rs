//! Config-driven benchmark runs.
//!
//! A run writes one `tasks/<task_id>.json` per episode and a `report.json`
//! aggregating them. Both are written via temp-file rename. With `resume`,
//! tasks whose file already parses are not run again.

pub mod config;
pub mod metrics;
pub mod report;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{BackendSource, BackendSpec, RunConfig};
pub use metrics::{
    attach_improvements, avg_steps, cost_usage, expense_dollars, improvement, success_rate, Direction, Metric,
    MetricRow, Scoring, StepsMode,
};
pub use report::{render_report, Format, ReportTable, RunReport, RunStats, TaskOutcome};

use crate::env::{EnvKind, Environment};
use crate::llm::{CompletionBackend, CostLedger, PriceTable, ReplayBackend, ReplayTranscript, Role, RoleClient};
use crate::orchestrator::{run_method, Agents, EpisodeResult, Method, PromptSet};
use crate::stubs::rule_backend;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad report: {0}")]
    Report(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `contents` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// Command-line overrides of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub resume: bool,
}

#[derive(Clone)]
enum RoleBackend {
    Shared(Arc<dyn CompletionBackend>),
    Transcripts { dir: PathBuf, name: String },
}

impl RoleBackend {
    fn build(source: BackendSource, role: &str, kind: EnvKind, config: &RunConfig) -> Result<Self, HarnessError> {
        let name = format!("{role}-{}", match &source {
            BackendSource::Stub => "stub",
            BackendSource::Transcripts(_) => "replay",
            BackendSource::Endpoint { .. } => "endpoint",
        });
        match source {
            BackendSource::Stub => Ok(RoleBackend::Shared(rule_backend(kind, &name))),
            BackendSource::Transcripts(dir) => {
                let dir = config.resolve(&dir);
                if !dir.is_dir() {
                    return Err(HarnessError::Config(format!(
                        "backend {role}: transcript directory {} does not exist",
                        dir.display()
                    )));
                }
                Ok(RoleBackend::Transcripts { dir, name })
            }
            BackendSource::Endpoint { url, model, api_key, timeout_secs } => endpoint(url, model, api_key, timeout_secs),
        }
    }

    /// The backend for one task. Transcripts are per task, so each episode
    /// gets its own replay cursor.
    fn for_task(&self, task_id: &str) -> Result<Arc<dyn CompletionBackend>, String> {
        match self {
            RoleBackend::Shared(b) => Ok(b.clone()),
            RoleBackend::Transcripts { dir, name } => {
                let path = dir.join(format!("{task_id}.jsonl"));
                let transcript = ReplayTranscript::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                Ok(Arc::new(ReplayBackend::named(name, transcript)))
            }
        }
    }
}

#[cfg(feature = "http")]
fn endpoint(url: String, model: String, api_key: Option<String>, timeout: Option<u64>) -> Result<RoleBackend, HarnessError> {
    let mut cfg = crate::llm::EndpointConfig::new(&url, &model);
    cfg.api_key = api_key;
    if let Some(t) = timeout {
        cfg.timeout_secs = t;
    }
    let backend = crate::llm::HttpBackend::new(cfg).map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(RoleBackend::Shared(Arc::new(backend)))
}

#[cfg(not(feature = "http"))]
fn endpoint(_: String, _: String, _: Option<String>, _: Option<u64>) -> Result<RoleBackend, HarnessError> {
    Err(HarnessError::Config("endpoint backends need the `http` feature".into()))
}

struct Backends {
    weak: Option<RoleBackend>,
    strong: RoleBackend,
    extractor: Option<RoleBackend>,
}

impl Backends {
    fn build(config: &RunConfig, kind: EnvKind) -> Result<Self, HarnessError> {
        let b = &config.backends;
        let role = |spec: &Option<BackendSpec>, name: &str| -> Result<Option<RoleBackend>, HarnessError> {
            spec.as_ref()
                .map(|s| RoleBackend::build(s.source(name)?, name, kind, config))
                .transpose()
        };
        let uses_weak = config.method.decoupled() && !config.method.strong_explorer();
        Ok(Backends {
            weak: if uses_weak { role(&b.weak, "weak")? } else { None },
            strong: role(&b.strong, "strong")?
                .ok_or_else(|| HarnessError::Config("missing strong backend".into()))?,
            extractor: role(&b.extractor, "extractor")?,
        })
    }

    fn agents(&self, method: Method, task_id: &str, prices: PriceTable) -> Result<Agents, String> {
        let strong_price = prices.price(Role::StrongExploit);
        let prices = if method.decoupled() && !method.strong_explorer() {
            prices
        } else {
            prices.with(Role::Extraction, strong_price)
        };
        let ledger = Arc::new(CostLedger::new(prices));
        let strong = self.strong.for_task(task_id)?;
        let mut agents = match &self.weak {
            Some(weak) => Agents::wese(weak.for_task(task_id)?, strong, ledger.clone()),
            None => Agents::sese(strong, ledger.clone()),
        };
        if let Some(extractor) = &self.extractor {
            agents.extractor = RoleClient::new(extractor.for_task(task_id)?, Role::Extraction, ledger);
        }
        Ok(agents)
    }
}

fn outcome(result: &EpisodeResult) -> TaskOutcome {
    TaskOutcome {
        task_id: result.task_id.clone(),
        file: format!("tasks/{}.json", result.task_id),
        success: result.success,
        steps: result.steps(),
        first_reward_step: result.first_reward_step,
        total_reward: result.total_reward,
        usage: cost_usage(result),
        expense: expense_dollars(result),
        error: result.error.clone(),
    }
}

/// The suite's scoring scheme.
pub fn scoring_for(env: &dyn Environment) -> Scoring {
    if env.milestone_rewards() {
        Scoring::Reward
    } else {
        Scoring::Success
    }
}

/// Runs every task of the configured suite and writes the run directory.
pub fn run_benchmark(config: &RunConfig, options: &RunOptions) -> Result<RunReport, HarnessError> {
    let started = Instant::now();
    config.validate()?;
    let env = config.load_environment()?;
    let kind = env.kind();
    let prompts = match &config.prompts {
        Some(dir) => PromptSet::load_dir(kind, &config.resolve(dir)).map_err(|e| HarnessError::Config(e.to_string()))?,
        None => PromptSet::defaults(kind),
    };
    let all: Vec<String> = env.tasks().into_iter().map(|t| t.id).collect();
    let task_ids = match &config.tasks {
        Some(ids) => {
            if let Some(bad) = ids.iter().find(|id| !all.contains(id)) {
                return Err(HarnessError::Config(format!("unknown task {bad:?}")));
            }
            ids.clone()
        }
        None => all,
    };
    let backends = Backends::build(config, kind)?;
    let out = options
        .out
        .clone()
        .or_else(|| config.out.as_ref().map(|o| config.resolve(o)))
        .ok_or_else(|| HarnessError::Config("no output directory (set `out` or pass --out)".into()))?;
    let tasks_dir = out.join("tasks");
    std::fs::create_dir_all(&tasks_dir).map_err(io_err(&tasks_dir))?;
    let workers = options.workers.unwrap_or(config.workers);
    if workers == 0 {
        return Err(HarnessError::Config("workers must be at least 1".into()));
    }

    let mut done: BTreeMap<String, EpisodeResult> = BTreeMap::new();
    if options.resume {
        for id in &task_ids {
            let path = tasks_dir.join(format!("{id}.json"));
            if let Ok(text) = std::fs::read_to_string(&path) {
                match EpisodeResult::from_json(&text) {
                    Ok(r) if r.task_id == *id && r.method == config.method => {
                        done.insert(id.clone(), r);
                    }
                    _ => tracing::warn!(task = %id, "ignoring unreadable task file"),
                }
            }
        }
    }
    let resumed = done.len();
    let spent = Mutex::new(done.values().map(expense_dollars).sum::<f64>());
    let exhausted = AtomicBool::new(false);
    let budget = config.pricing.budget_dollars;
    let prices = PriceTable::new(config.pricing.weak_per_1k, config.pricing.strong_per_1k);
    let phase_budget = config.budget(kind);
    let retrieval = config.retrieval(kind);
    let pending: Vec<&String> = task_ids.iter().filter(|id| !done.contains_key(*id)).collect();

    let run_one = |id: &String| -> Result<Option<EpisodeResult>, HarnessError> {
        if let Some(limit) = budget {
            if *spent.lock().expect("spend lock") >= limit {
                exhausted.store(true, Ordering::SeqCst);
                return Ok(None);
            }
        }
        let result = match backends.agents(config.method, id, prices.clone()) {
            Err(e) => EpisodeResult::failed(id, config.method, e),
            Ok(agents) => catch_unwind(AssertUnwindSafe(|| {
                run_method(
                    config.method,
                    env.as_ref(),
                    id,
                    &agents,
                    &prompts,
                    phase_budget,
                    &retrieval,
                    &config.episode,
                )
            }))
            .unwrap_or_else(|_| EpisodeResult::failed(id, config.method, "episode panicked")),
        };
        write_atomic(&tasks_dir.join(format!("{id}.json")), &result.to_json())?;
        *spent.lock().expect("spend lock") += expense_dollars(&result);
        tracing::info!(task = %id, success = result.success, "episode finished");
        Ok(Some(result))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let fresh: Vec<Result<Option<EpisodeResult>, HarnessError>> =
        pool.install(|| pending.par_iter().map(|id| run_one(id)).collect());
    let mut executed = 0;
    let mut backend_calls = 0;
    for r in fresh {
        if let Some(result) = r? {
            executed += 1;
            backend_calls += result.ledger.events.len();
            done.insert(result.task_id.clone(), result);
        }
    }
    if exhausted.load(Ordering::SeqCst) {
        tracing::warn!("dollar budget exhausted; remaining tasks skipped");
    }

    let results: Vec<EpisodeResult> = task_ids.iter().filter_map(|id| done.remove(id)).collect();
    let skipped: Vec<String> = task_ids
        .iter()
        .filter(|id| !results.iter().any(|r| &r.task_id == *id))
        .cloned()
        .collect();
    let scoring = scoring_for(env.as_ref());
    let mut rows = vec![MetricRow::from_results(config.method, &results, scoring)];
    attach_improvements(&mut rows, scoring);
    let mut report = RunReport {
        format_version: report::REPORT_FORMAT_VERSION.to_string(),
        repo_version: env!("CARGO_PKG_VERSION").to_string(),
        method: config.method,
        env: kind,
        scoring,
        config: config.echo(),
        tasks: results.iter().map(outcome).collect(),
        skipped,
        rows,
        stats: RunStats::default(),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&out.join("report.json"), &json)?;
    report.stats = RunStats {
        executed,
        resumed,
        backend_calls,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    let timing = serde_json::json!({ "wall_clock_secs": report.stats.wall_clock_secs });
    write_atomic(&out.join("timing.json"), &timing.to_string())?;
    Ok(report)
}

/// Reads a run directory and recomputes its rows from the task files.
pub fn load_run(dir: &Path) -> Result<RunReport, HarnessError> {
    let path = dir.join("report.json");
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut report: RunReport =
        serde_json::from_str(&text).map_err(|e| HarnessError::Report(format!("{}: {e}", path.display())))?;
    let major = report.format_version.split('.').next();
    if major != Some("1") {
        return Err(HarnessError::Report(format!(
            "unsupported report version {:?}",
            report.format_version
        )));
    }
    let mut results = Vec::with_capacity(report.tasks.len());
    for t in &report.tasks {
        let p = dir.join(&t.file);
        let text = std::fs::read_to_string(&p).map_err(io_err(&p))?;
        results.push(EpisodeResult::from_json(&text).map_err(|e| HarnessError::Report(format!("{}: {e}", p.display())))?);
    }
    let mut rows = vec![MetricRow::from_results(report.method, &results, report.scoring)];
    attach_improvements(&mut rows, report.scoring);
    report.rows = rows;
    Ok(report)
}

/// One table from a run directory, or from every run directory directly
/// beneath it. Rows are ordered by method family, improvements recomputed.
pub fn collect_table(dir: &Path) -> Result<ReportTable, HarnessError> {
    let mut runs = Vec::new();
    if dir.join("report.json").is_file() {
        runs.push(load_run(dir)?);
    } else {
        let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io_err(dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("report.json").is_file())
            .collect();
        subdirs.sort();
        for d in subdirs {
            runs.push(load_run(&d)?);
        }
    }
    let Some(first) = runs.first() else {
        return Err(HarnessError::Report(format!("no report.json in {}", dir.display())));
    };
    let scoring = first.scoring;
    if runs.iter().any(|r| r.scoring != scoring) {
        return Err(HarnessError::Report("runs mix success and reward scoring".into()));
    }
    let mut rows: Vec<MetricRow> = runs.into_iter().flat_map(|r| r.rows).collect();
    let order = |r: &MetricRow| Method::from_label(&r.method).map_or(usize::MAX, |m| {
        Method::ALL.iter().position(|x| *x == m).unwrap_or(usize::MAX)
    });
    rows.sort_by_key(order);
    attach_improvements(&mut rows, scoring);
    Ok(ReportTable { scoring, rows })
}
