use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wese::env::wiki::{generate_corpus, WikiConfig};
use wese::env::{check_witness, load_environment, EnvKind, RewardScheme, WorldConfig};
use wese::env::household::generate_world;
use wese::harness::{collect_table, run_benchmark, write_atomic, Format, HarnessError, RunConfig, RunOptions};

const CONFIG_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "wese", version, about = "Explore cheaply, exploit with knowledge: agent runs and reports")]
struct Cli {
    /// Log progress to stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark suite described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Keep finished task files and run only the rest.
        #[arg(long)]
        resume: bool,
    },
    /// Render the results table of one run directory or of a directory of runs.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "table")]
        format: Format,
    },
    /// Generate a household world or a wiki corpus.
    GenTasks {
        #[arg(long)]
        kind: EnvKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Household only: milestone rewards summing to 100 instead of 0/1.
        #[arg(long)]
        milestones: bool,
    },
    /// Replay every task's witness solution.
    ValidateEnv {
        #[arg(long)]
        world: PathBuf,
    },
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
}

fn fail(err: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(CONFIG_ERROR)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match cli.command {
        Command::Run { config, out, workers, resume } => {
            let config = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let report = match run_benchmark(&config, &RunOptions { out, workers, resume }) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            print!("{}", report.table().render_table());
            let failed = report.tasks.iter().filter(|t| !t.success).count();
            eprintln!(
                "{} tasks: {} run, {} resumed, {} failed, {} skipped; {} backend calls in {:.1}s",
                report.tasks.len() + report.skipped.len(),
                report.stats.executed,
                report.stats.resumed,
                failed,
                report.skipped.len(),
                report.stats.backend_calls,
                report.stats.wall_clock_secs
            );
            if report.all_succeeded() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Report { input, format } => match collect_table(&input) {
            Ok(table) => {
                print!("{}", table.render(format));
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::GenTasks { kind, seed, count, out, milestones } => {
            let json = match kind {
                EnvKind::Household => {
                    let config = WorldConfig {
                        reward_scheme: if milestones { RewardScheme::Milestone } else { RewardScheme::Binary },
                        ..WorldConfig::default()
                    };
                    generate_world(seed, count, &config).to_json()
                }
                EnvKind::WikiQa => {
                    if milestones {
                        return fail("--milestones applies to household worlds only");
                    }
                    generate_corpus(seed, count, &WikiConfig::default()).to_json()
                }
            };
            match write_atomic(&out, &json) {
                Ok(()) => {
                    eprintln!("wrote {count} {kind} tasks to {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::ValidateEnv { world } => {
            let env = match load_environment(&world) {
                Ok(e) => e,
                Err(e) => return fail(HarnessError::Config(e.to_string())),
            };
            let mut bad = 0;
            let tasks = env.tasks();
            for task in &tasks {
                if let Err(why) = check_witness(env.as_ref(), &task.id) {
                    bad += 1;
                    println!("FAIL {}: {why}", task.id);
                }
            }
            println!("{} of {} witnesses replay to completion", tasks.len() - bad, tasks.len());
            if bad == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
