use std::fmt::Display;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use deskbench::config::{PolicySpec, ScenarioConfig};
use deskbench::envs::{
    ExplorationAction, ExplorationEnv, MacsAction, MacsEnv, RobotCommand, SocialNavEnv, SocialNavScenario,
};
use deskbench::metrics::{score_seating, SeatingPlan, SeatingProblem};
use deskbench::parallel::{measure_throughput, throughput_csv, throughput_plot_data, ThroughputSample};
use deskbench::record::{read_jsonl, write_jsonl, Task};
use deskbench::report::BenchmarkReport;
use deskbench::runner::{run_scenario, score_records, verify_replay};
use deskbench::Error;
use deskbench_server::{serve, ServeOptions};

#[derive(Parser)]
#[command(name = "deskbench", version, about = "Desk-scale embodied-AI benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report.json, summary.csv and records.jsonl.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        policy: Option<String>,
    },
    /// Measure vectorized steps/sec for several environment counts.
    Throughput {
        #[arg(long, value_enum, default_value = "macs")]
        env: EnvKind,
        /// Scenario whose task parameters are used instead of defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        envs: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "runs/throughput")]
        out: PathBuf,
    },
    /// Serve a live social-navigation session over WebSocket.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulated seconds per wall second; 0 runs unpaced.
        #[arg(long, default_value_t = 1.0)]
        pace: f64,
        /// Directory for session.jsonl.
        #[arg(long, default_value = "runs/session")]
        out: PathBuf,
    },
    /// Recompute metrics from records, or score a seating plan.
    Score {
        records: Vec<PathBuf>,
        /// Compare the recomputed aggregates with this report.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, requires = "plan")]
        problem: Option<PathBuf>,
        #[arg(long, requires = "problem")]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-simulate records from their seeds and actions and compare.
    Replay { records: Vec<PathBuf> },
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    Exploration,
    Macs,
    Socialnav,
}

/// Exit 2 for bad input (config, schema), 1 for everything else.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Schema(_) | Error::Json(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(msg: impl Display) -> Failure {
    Failure {
        code: 2,
        message: msg.to_string(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    if !path.exists() {
        return Err(usage(format!("{}: no such file", path.display())));
    }
    Ok(ScenarioConfig::load(path)?)
}

fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    episodes: Option<u32>,
    out: Option<PathBuf>,
    policy: Option<String>,
) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(n) = episodes {
        cfg.episodes = n;
    }
    if let Some(p) = policy {
        if p != cfg.policy.name {
            cfg.policy = PolicySpec::named(&p);
        }
    }
    if let Some(o) = out {
        cfg.output = o;
    }
    cfg.validate()?;
    log::info!("running {} episodes of {} with {}", cfg.episode_keys().len(), cfg.task, cfg.policy.name);
    let (report, records) = run_scenario(&cfg)?;
    report.write(&cfg.output)?;
    std::fs::write(cfg.output.join("records.jsonl"), write_jsonl(&records)?).map_err(Error::from)?;
    println!("{}", serde_json::to_string_pretty(&report.aggregates).map_err(Error::from)?);
    log::info!("wrote {}", cfg.output.display());
    Ok(())
}

fn throughput_samples(env: EnvKind, cfg: Option<&ScenarioConfig>, counts: &[usize], steps: u64, seed: u64) -> deskbench::Result<Vec<ThroughputSample>> {
    match env {
        EnvKind::Macs => {
            let mc = cfg.map(|c| c.macs_config()).unwrap_or_default();
            let n = mc.n_agents;
            measure_throughput(|_| MacsEnv::new(mc.clone()), counts, steps, seed, |_, _| vec![MacsAction::new(0.0, 0.0); n])
        }
        EnvKind::Socialnav => {
            let sc = cfg.map(|c| c.socialnav_scenario()).unwrap_or_default();
            measure_throughput(|_| SocialNavEnv::new(sc.clone()), counts, steps, seed, |_, _| RobotCommand::default())
        }
        EnvKind::Exploration => {
            let ec = cfg.map(|c| c.exploration_config()).unwrap_or_default();
            measure_throughput(|_| ExplorationEnv::new(ec.clone()), counts, steps, seed, |_, o| ExplorationAction::RotateTo {
                heading: o.pose.heading,
            })
        }
    }
}

fn cmd_throughput(env: EnvKind, config: Option<PathBuf>, counts: &[usize], steps: u64, seed: u64, out: &Path) -> Result<(), Failure> {
    if counts.is_empty() || counts.contains(&0) {
        return Err(usage("--envs needs positive counts"));
    }
    let cfg = config.as_deref().map(load_config).transpose()?;
    let env = match cfg.as_ref().map(|c| c.task) {
        None => env,
        Some(Task::Macs) => EnvKind::Macs,
        Some(Task::Socialnav) => EnvKind::Socialnav,
        Some(Task::Exploration) => EnvKind::Exploration,
        Some(Task::Seating) => return Err(usage("seating has no environment to step")),
    };
    let samples = throughput_samples(env, cfg.as_ref(), counts, steps, seed)?;
    std::fs::create_dir_all(out).map_err(Error::from)?;
    let csv = throughput_csv(&samples)?;
    std::fs::write(out.join("throughput.csv"), &csv).map_err(Error::from)?;
    std::fs::write(out.join("throughput.dat"), throughput_plot_data(&samples)).map_err(Error::from)?;
    print!("{csv}");
    Ok(())
}

fn cmd_serve(config: Option<PathBuf>, port: u16, seed: u64, pace: f64, out: PathBuf) -> Result<(), Failure> {
    let scenario = match config.as_deref().map(load_config).transpose()? {
        Some(c) if c.task != Task::Socialnav => return Err(usage("serve needs a socialnav scenario")),
        Some(c) => c.socialnav_scenario(),
        None => SocialNavScenario::default(),
    };
    scenario.validate()?;
    if !(pace >= 0.0 && pace.is_finite()) {
        return Err(usage("--pace must be a non-negative number"));
    }
    std::fs::create_dir_all(&out).map_err(Error::from)?;
    let opts = ServeOptions {
        pace,
        seed,
        record_path: Some(out.join("session.jsonl")),
        ..ServeOptions::default()
    };
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let rt = tokio::runtime::Runtime::new().map_err(Error::from)?;
    rt.block_on(async {
        let handle = serve(scenario, addr, opts).await.map_err(|e| Failure {
            code: 1,
            message: e.to_string(),
        })?;
        eprintln!("listening on {}", handle.url());
        let _ = tokio::signal::ctrl_c().await;
        let records = handle.shutdown().await.map_err(|e| Failure {
            code: 1,
            message: e.to_string(),
        })?;
        eprintln!("{} episode(s) recorded to {}", records.len(), out.join("session.jsonl").display());
        Ok(())
    })
}

fn read_records(paths: &[PathBuf]) -> Result<Vec<deskbench::record::EpisodeRecord>, Failure> {
    if paths.is_empty() {
        return Err(usage("no record files given"));
    }
    let mut all = Vec::new();
    for p in paths {
        let recs = read_jsonl(&read(p)?).map_err(|e| match e {
            Error::Schema(m) => Error::Schema(format!("{}: {m}", p.display())),
            other => other,
        })?;
        all.extend(recs);
    }
    Ok(all)
}

fn cmd_score(
    records: &[PathBuf],
    report: Option<PathBuf>,
    problem: Option<PathBuf>,
    plan: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), Failure> {
    if let (Some(problem), Some(plan)) = (problem, plan) {
        let problem: SeatingProblem = serde_json::from_str(&read(&problem)?).map_err(Error::from)?;
        let plan: SeatingPlan = serde_json::from_str(&read(&plan)?).map_err(Error::from)?;
        let score = score_seating(&problem, &plan)?;
        println!("{}", serde_json::to_string_pretty(&score).map_err(Error::from)?);
        return Ok(());
    }
    let recs = read_records(records)?;
    let task = recs[0].header.task;
    if let Some(r) = recs.iter().find(|r| r.header.task != task) {
        return Err(usage(format!("records mix tasks {task} and {}", r.header.task)));
    }
    let rows = score_records(&recs)?;
    let scenario = serde_json::json!({ "task": task, "scored_from": records });
    let scored = BenchmarkReport::new(task, scenario, rows)?;
    if let Some(path) = report {
        let live = BenchmarkReport::read(&path)?;
        if live.episodes != scored.episodes || live.aggregates != scored.aggregates {
            return Err(Error::RecordCheck(format!("scores recomputed from records differ from {}", path.display())).into());
        }
        log::info!("offline scores match {}", path.display());
    }
    if let Some(dir) = out {
        scored.write(&dir)?;
    }
    println!("{}", serde_json::to_string_pretty(&scored.aggregates).map_err(Error::from)?);
    Ok(())
}

fn cmd_replay(records: &[PathBuf]) -> Result<(), Failure> {
    let recs = read_records(records)?;
    for r in &recs {
        verify_replay(r).map_err(|e| {
            Failure::from(Error::RecordCheck(format!("seed {} episode {}: {e}", r.header.seed, r.header.episode)))
        })?;
    }
    println!("{} record(s) replayed identically", recs.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BENCH_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            episodes,
            out,
            policy,
        } => cmd_run(&config, seed, episodes, out, policy),
        Command::Throughput {
            env,
            config,
            envs,
            steps,
            seed,
            out,
        } => cmd_throughput(env, config, &envs, steps, seed, &out),
        Command::Serve {
            config,
            port,
            seed,
            pace,
            out,
        } => cmd_serve(config, port, seed, pace, out),
        Command::Score {
            records,
            report,
            problem,
            plan,
            out,
        } => cmd_score(&records, report, problem, plan, out),
        Command::Replay { records } => cmd_replay(&records),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
