use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use thiserror::Error;

use tabsa::bench::{
    aggregate, render_course, render_histogram, run_batch, run_single, write_histogram_csv,
    write_summaries_csv, BenchError, BenchmarkPlan, RunConfig, RunSummary,
};
use tabsa::dqn::{train, write_curve_csv, TrainConfig, TrainError};
use tabsa::engine::{EngineError, ScenarioConfig, Trace};
use tabsa::tasks::generate_tasks;
use tabsa::worldgen::generate_environment;

#[derive(Parser)]
#[command(name = "tabsa", version, about = "Robot task-scheduling simulator and benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a map and write it as JSON (plus an optional SVG).
    GenEnv {
        /// Scenario config; only its `env` section and seeds are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Generate the task list of a scenario.
    GenTasks {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one scenario and write its outcome, statistics and trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a benchmark plan.
    Batch {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides the plan's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Train a Q-network agent.
    TrainDqn {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        out: PathBuf,
        /// Learning curve CSV; defaults to the network path with `.csv`.
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize the results stored in a run or batch directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Generation(_) => 2,
            CliError::Run(_) => 3,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        if e.is_generation_failure() {
            CliError::Generation(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Engine(e) => e.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Engine(e) => e.into(),
            TrainError::Reward(e) => CliError::Config(e.to_string()),
            TrainError::Dqn(e) => CliError::Run(e.to_string()),
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn read_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    path.map_or_else(|| Ok(T::default()), read_json)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Run(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Run(e.to_string()))
}

fn scenario_with_seed(mut cfg: ScenarioConfig, seed: Option<u64>) -> ScenarioConfig {
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    cfg
}

fn gen_env(config: Option<&Path>, seed: Option<u64>, out: &Path, svg: Option<&Path>) -> Result<(), CliError> {
    let cfg = scenario_with_seed(read_or_default(config)?, seed);
    cfg.env.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let map = generate_environment(&cfg.env, cfg.seed_set().map_seed)
        .map_err(|e| CliError::Generation(e.to_string()))?;
    write_file(out, map.to_json().map_err(|e| CliError::Run(e.to_string()))?)?;
    if let Some(svg) = svg {
        write_file(svg, map.to_svg(4.0))?;
    }
    println!(
        "map {}x{} cells, {} rooms, {} furniture, {} objects -> {}",
        map.cols,
        map.rows,
        map.rooms.len(),
        map.furniture.len(),
        map.objects.len(),
        out.display()
    );
    Ok(())
}

fn gen_tasks(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let cfg = scenario_with_seed(read_or_default(config)?, seed);
    cfg.validate()?;
    let seeds = cfg.seed_set();
    let map = generate_environment(&cfg.env, seeds.map_seed).map_err(|e| CliError::Generation(e.to_string()))?;
    let tasks = generate_tasks(&cfg.task_params(), &map, seeds.task_seed)
        .map_err(|e| CliError::Generation(e.to_string()))?;
    write_file(out, to_json(&tasks)?)?;
    println!("{} tasks -> {}", tasks.len(), out.display());
    Ok(())
}

fn run(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut rc: RunConfig = read_json(config)?;
    rc.scenario = scenario_with_seed(rc.scenario, seed);
    rc.scenario.record_trace = true;
    rc.scenario.validate()?;
    let seeds = rc.scenario.seed_set();
    let map = Arc::new(
        generate_environment(&rc.scenario.env, seeds.map_seed).map_err(|e| CliError::Generation(e.to_string()))?,
    );
    let start = std::time::Instant::now();
    let report = run_single(&rc.scenario, &rc.agent, &rc.eval)?;
    let wall = start.elapsed().as_secs_f64() * 1000.0;
    fs::create_dir_all(out).map_err(|e| CliError::Run(format!("{}: {e}", out.display())))?;
    write_file(&out.join("outcome.json"), to_json(&report.outcome)?)?;
    if let Some(stats) = &report.stats {
        write_file(&out.join("stats.json"), to_json(stats)?)?;
    }
    if let Some(trace) = &report.trace {
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).map_err(|e| CliError::Run(e.to_string()))?;
        write_file(&out.join("trace.jsonl"), buf)?;
        write_file(&out.join("course.svg"), render_course(trace))?;
    }
    write_file(&out.join("map.svg"), map.to_svg(4.0))?;
    let summary = RunSummary {
        agent: rc.agent.label(),
        agent_index: 0,
        run: 0,
        seed: rc.scenario.seed,
        seeds,
        outcome: Some(report.outcome.clone()),
        stats: report.stats.clone(),
        error: None,
        wall_time_ms: wall,
    };
    write_file(&out.join("summaries.json"), to_json(&vec![summary])?)?;
    println!(
        "{}: {} after {} steps ({}/{} tasks completed), trace {}",
        rc.agent.label(),
        report.outcome.kind.name(),
        report.outcome.steps,
        report.outcome.completed,
        report.outcome.total_tasks,
        report.outcome.trace_hash
    );
    Ok(())
}

fn batch(plan_path: &Path, jobs: usize, out: Option<&Path>, runs: Option<usize>) -> Result<(), CliError> {
    let mut plan: BenchmarkPlan = read_json(plan_path)?;
    if let Some(r) = runs {
        plan.runs = r;
    }
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| plan.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("batch-out"));
    let summaries = run_batch(&plan, jobs)?;
    fs::create_dir_all(&dir).map_err(|e| CliError::Run(format!("{}: {e}", dir.display())))?;
    write_file(&dir.join("summaries.json"), to_json(&summaries)?)?;
    let mut csv = Vec::new();
    write_summaries_csv(&summaries, &mut csv).map_err(|e| CliError::Run(e.to_string()))?;
    write_file(&dir.join("summaries.csv"), csv)?;
    let aggs = aggregate(&summaries);
    for a in &aggs {
        println!(
            "{:<28} completed {:>3}/{:<3} died {:>3} terminated {:>3} timed out {:>3} errors {}",
            a.agent,
            a.completed_scenarios(),
            a.runs,
            a.outcomes.get(&tabsa::OutcomeKind::JobDied).unwrap_or(&0),
            a.outcomes.get(&tabsa::OutcomeKind::Terminated).unwrap_or(&0),
            a.outcomes.get(&tabsa::OutcomeKind::TimedOut).unwrap_or(&0),
            a.errors
        );
    }
    let failed = summaries.iter().filter(|s| s.error.is_some()).count();
    println!("{} runs -> {}", summaries.len(), dir.display());
    if failed > 0 {
        return Err(CliError::Run(format!("{failed} runs failed")));
    }
    Ok(())
}

fn train_dqn(
    config: Option<&Path>,
    episodes: usize,
    out: &Path,
    curve: Option<&Path>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    if episodes == 0 {
        return Err(CliError::Config("episodes must be at least 1".into()));
    }
    let mut cfg: TrainConfig = read_or_default(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.scenario.validate()?;
    let (net, stats) = train(&cfg, episodes)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Run(e.to_string()))?;
    }
    net.save_file(out).map_err(|e| CliError::Run(e.to_string()))?;
    let curve_path = curve.map_or_else(|| out.with_extension("csv"), Path::to_path_buf);
    let mut buf = Vec::new();
    write_curve_csv(&stats, &mut buf).map_err(|e| CliError::Run(e.to_string()))?;
    write_file(&curve_path, buf)?;
    let k = stats.len().min(20);
    let mean = |s: &[tabsa::dqn::EpisodeStat]| s.iter().map(|e| e.total_reward).sum::<f64>() / s.len().max(1) as f64;
    println!(
        "{} episodes: mean reward first {k} {:.2}, last {k} {:.2} -> {}",
        stats.len(),
        mean(&stats[..k]),
        mean(&stats[stats.len() - k..]),
        out.display()
    );
    Ok(())
}

fn report(dir: &Path, format: Format) -> Result<(), CliError> {
    let summaries_path = dir.join("summaries.json");
    let summaries: Vec<RunSummary> = read_json(&summaries_path)?;
    let aggs = aggregate(&summaries);
    let written: Vec<PathBuf> = match format {
        Format::Csv => {
            let mut runs = Vec::new();
            write_summaries_csv(&summaries, &mut runs).map_err(|e| CliError::Run(e.to_string()))?;
            let mut hist = Vec::new();
            write_histogram_csv(&aggs, &mut hist).map_err(|e| CliError::Run(e.to_string()))?;
            write_file(&dir.join("summaries.csv"), runs)?;
            write_file(&dir.join("histogram.csv"), hist)?;
            vec![dir.join("summaries.csv"), dir.join("histogram.csv")]
        }
        Format::Json => {
            write_file(&dir.join("report.json"), to_json(&aggs)?)?;
            vec![dir.join("report.json")]
        }
        Format::Svg => {
            write_file(&dir.join("histogram.svg"), render_histogram(&aggs))?;
            let mut out = vec![dir.join("histogram.svg")];
            let trace_path = dir.join("trace.jsonl");
            if trace_path.exists() {
                let f = fs::File::open(&trace_path).map_err(|e| CliError::Config(e.to_string()))?;
                let trace = Trace::read_jsonl(BufReader::new(f))
                    .map_err(|e| CliError::Config(format!("{}: {e}", trace_path.display())))?;
                write_file(&dir.join("course.svg"), render_course(&trace))?;
                out.push(dir.join("course.svg"));
            }
            out
        }
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenEnv { config, seed, out, svg } => gen_env(config.as_deref(), *seed, out, svg.as_deref()),
        Command::GenTasks { config, seed, out } => gen_tasks(config.as_deref(), *seed, out),
        Command::Run { config, out, seed } => run(config, out, *seed),
        Command::Batch { plan, jobs, out, runs } => batch(plan, *jobs, out.as_deref(), *runs),
        Command::TrainDqn {
            config,
            episodes,
            out,
            curve,
            seed,
        } => train_dqn(config.as_deref(), *episodes, out, curve.as_deref(), *seed),
        Command::Report { input, format } => report(input, *format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
