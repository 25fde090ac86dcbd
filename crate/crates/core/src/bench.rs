//! Batch runner, reports and the course timeline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentSpec;
use crate::determinism::{split, SeedSet};
use crate::engine::{EngineError, OutcomeKind, Scenario, ScenarioConfig, ScenarioOutcome, Trace};
use crate::eval::{DqnEval, EvalFunction, RewardParams, StatEval, StatParams, StatRecord};
use crate::tasks::{TaskId, TaskKind};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Agent(#[from] crate::agents::AgentSpecError),
    #[error(transparent)]
    Reward(#[from] crate::eval::RewardError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "eval", rename_all = "snake_case")]
pub enum EvalSpec {
    Statistic {
        #[serde(default)]
        params: StatParams,
    },
    Dqn {
        #[serde(default)]
        rewards: RewardParams,
    },
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec::Statistic {
            params: StatParams::default(),
        }
    }
}

/// Config of a single `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    pub agent: AgentSpec,
    #[serde(default)]
    pub eval: EvalSpec,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: ScenarioOutcome,
    pub stats: Option<StatRecord>,
    pub total_reward: Option<f64>,
    pub trace: Option<Trace>,
}

enum AnyEval {
    Stat(Box<StatEval>),
    Dqn(DqnEval),
}

impl AnyEval {
    fn build(spec: &EvalSpec) -> Result<Self, BenchError> {
        Ok(match spec {
            EvalSpec::Statistic { params } => AnyEval::Stat(Box::new(StatEval::new(*params))),
            EvalSpec::Dqn { rewards } => AnyEval::Dqn(DqnEval::new(*rewards)?),
        })
    }

    fn as_dyn(&mut self) -> &mut dyn EvalFunction {
        match self {
            AnyEval::Stat(e) => e.as_mut(),
            AnyEval::Dqn(e) => e,
        }
    }
}

/// Build and run one scenario with the given agent and eval function.
pub fn run_single(
    scenario: &ScenarioConfig,
    agent: &AgentSpec,
    eval: &EvalSpec,
) -> Result<RunReport, BenchError> {
    let mut sc = Scenario::new(scenario)?;
    let mut a = agent.build(sc.seeds.agent_seed, sc.map().diagonal())?;
    let mut e = AnyEval::build(eval)?;
    let outcome = sc.run(a.as_mut(), e.as_dyn());
    let (stats, total_reward) = match e {
        AnyEval::Stat(s) => (Some(s.record), None),
        AnyEval::Dqn(d) => (None, Some(d.total_reward)),
    };
    Ok(RunReport {
        outcome,
        stats,
        total_reward,
        trace: sc.take_trace(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Every agent gets its own seeds.
    FreshPerRun,
    /// Run `i` uses the same seed for every agent.
    SharedAcrossAgents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlan {
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    pub seed_policy: SeedPolicy,
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub stats: StatParams,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl BenchmarkPlan {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.runs == 0 {
            return Err(BenchError::InvalidPlan("run count must be at least 1".into()));
        }
        if self.agents.is_empty() {
            return Err(BenchError::InvalidPlan("plan lists no agents".into()));
        }
        for a in &self.agents {
            a.validate()?;
        }
        self.scenario.validate()?;
        Ok(())
    }

    /// Base seed of run `run` for agent number `agent`.
    pub fn seed_for(&self, agent: usize, run: usize) -> u64 {
        let label = match self.seed_policy {
            SeedPolicy::SharedAcrossAgents => format!("run-{run}"),
            SeedPolicy::FreshPerRun => format!("agent-{agent}-run-{run}"),
        };
        split(self.base_seed, &label).expect("label")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub agent: String,
    pub agent_index: usize,
    pub run: usize,
    pub seed: u64,
    pub seeds: SeedSet,
    pub outcome: Option<ScenarioOutcome>,
    pub stats: Option<StatRecord>,
    pub error: Option<String>,
    pub wall_time_ms: f64,
}

impl RunSummary {
    pub fn outcome_kind(&self) -> Option<OutcomeKind> {
        self.outcome.as_ref().map(|o| o.kind)
    }

    /// Equality ignoring wall time.
    pub fn same_result(&self, other: &RunSummary) -> bool {
        RunSummary {
            wall_time_ms: 0.0,
            ..self.clone()
        } == RunSummary {
            wall_time_ms: 0.0,
            ..other.clone()
        }
    }
}

fn run_one(plan: &BenchmarkPlan, agent_index: usize, run: usize) -> RunSummary {
    let spec = &plan.agents[agent_index];
    let seed = plan.seed_for(agent_index, run);
    let cfg = ScenarioConfig {
        record_trace: false,
        ..plan.scenario.clone()
    }
    .with_seed(seed);
    let start = Instant::now();
    let result = run_single(&cfg, spec, &EvalSpec::Statistic { params: plan.stats });
    let wall_time_ms = start.elapsed().as_secs_f64() * 1000.0;
    let (outcome, stats, error) = match result {
        Ok(r) => (Some(r.outcome), r.stats, None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    RunSummary {
        agent: spec.label(),
        agent_index,
        run,
        seed,
        seeds: cfg.seed_set(),
        outcome,
        stats,
        error,
        wall_time_ms,
    }
}

/// Execute every (agent, run) pair on `jobs` worker threads. Failed runs
/// are recorded in their summary and the batch continues. Results are
/// sorted by agent, then seed.
pub fn run_batch(plan: &BenchmarkPlan, jobs: usize) -> Result<Vec<RunSummary>, BenchError> {
    plan.validate()?;
    let pairs: Vec<(usize, usize)> = (0..plan.agents.len())
        .flat_map(|a| (0..plan.runs).map(move |r| (a, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchError::InvalidPlan(e.to_string()))?;
    let mut out: Vec<RunSummary> =
        pool.install(|| pairs.par_iter().map(|&(a, r)| run_one(plan, a, r)).collect());
    out.sort_by(|x, y| {
        x.agent_index
            .cmp(&y.agent_index)
            .then(x.seed.cmp(&y.seed))
            .then(x.run.cmp(&y.run))
    });
    Ok(out)
}

/// Aggregate numbers for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAggregate {
    pub agent: String,
    pub runs: usize,
    pub errors: usize,
    /// Count per outcome, in [`OutcomeKind::ALL`] order.
    pub outcomes: BTreeMap<OutcomeKind, usize>,
    pub completed_by_kind: BTreeMap<TaskKind, u64>,
    pub deadline_deltas: BTreeMap<TaskKind, Vec<f64>>,
    pub mean_abs_deadline_delta: Option<f64>,
    pub mean_travel_distance: f64,
    pub interruptions: u64,
    pub abandonments: u64,
}

impl AgentAggregate {
    pub fn completed_scenarios(&self) -> usize {
        self.outcomes.get(&OutcomeKind::AllCompleted).copied().unwrap_or(0)
    }

    pub fn completed(&self, kind: TaskKind) -> u64 {
        self.completed_by_kind.get(&kind).copied().unwrap_or(0)
    }
}

/// Per-agent aggregates in the order agents first appear.
pub fn aggregate(summaries: &[RunSummary]) -> Vec<AgentAggregate> {
    let mut order: Vec<(usize, String)> = Vec::new();
    for s in summaries {
        if !order.iter().any(|(i, _)| *i == s.agent_index) {
            order.push((s.agent_index, s.agent.clone()));
        }
    }
    order.sort();
    order
        .into_iter()
        .map(|(idx, name)| {
            let mine: Vec<&RunSummary> = summaries.iter().filter(|s| s.agent_index == idx).collect();
            let mut outcomes: BTreeMap<OutcomeKind, usize> =
                OutcomeKind::ALL.iter().map(|k| (*k, 0)).collect();
            let mut completed_by_kind: BTreeMap<TaskKind, u64> = BTreeMap::new();
            let mut deadline_deltas: BTreeMap<TaskKind, Vec<f64>> = BTreeMap::new();
            let mut travel = 0.0;
            let mut interruptions = 0;
            let mut abandonments = 0;
            let mut errors = 0;
            for s in &mine {
                match s.outcome_kind() {
                    Some(k) => *outcomes.entry(k).or_insert(0) += 1,
                    None => errors += 1,
                }
                if let Some(st) = &s.stats {
                    for kind in TaskKind::ALL {
                        *completed_by_kind.entry(kind).or_insert(0) +=
                            st.num_of_tasks_completed.get(kind) as u64;
                    }
                    for d in &st.task_completion_to_deadline {
                        deadline_deltas.entry(d.kind).or_default().push(d.seconds);
                    }
                    travel += st.full_travel_distance;
                    interruptions += st.num_of_tasks_interrupted.total() as u64;
                    abandonments += st.num_of_human_abandonement as u64;
                }
            }
            let all: Vec<f64> = deadline_deltas.values().flatten().map(|d| d.abs()).collect();
            let mean_abs = (!all.is_empty()).then(|| all.iter().sum::<f64>() / all.len() as f64);
            let n = mine.len().max(1) as f64;
            AgentAggregate {
                agent: name,
                runs: mine.len(),
                errors,
                outcomes,
                completed_by_kind,
                deadline_deltas,
                mean_abs_deadline_delta: mean_abs,
                mean_travel_distance: travel / n,
                interruptions,
                abandonments,
            }
        })
        .collect()
}

const CSV_HEADER: [&str; 27] = [
    "agent",
    "run",
    "seed",
    "map_seed",
    "task_seed",
    "pedestrian_seed",
    "agent_seed",
    "outcome",
    "steps",
    "end_time",
    "completed",
    "total_tasks",
    "trace_hash",
    "full_travel_distance",
    "completed_fall",
    "completed_patrol",
    "completed_pick",
    "completed_place",
    "completed_pick_and_place",
    "interrupted_total",
    "abandonments",
    "abandonment_distance",
    "mean_abs_deadline_delta",
    "deadline_deltas",
    "deathtime_deltas",
    "wall_time_ms",
    "error",
];

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

/// One row per run: seeds, outcome and the flattened statistics.
pub fn write_summaries_csv<W: std::io::Write>(summaries: &[RunSummary], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in summaries {
        let o = s.outcome.as_ref();
        let st = s.stats.as_ref();
        let join = |v: Option<&Vec<crate::eval::TaskDelta>>| {
            v.map(|v| {
                v.iter()
                    .map(|d| format!("{}:{}", d.id.0, d.seconds))
                    .collect::<Vec<_>>()
                    .join(";")
            })
            .unwrap_or_default()
        };
        let kc = |k: TaskKind| st.map_or(String::new(), |st| st.num_of_tasks_completed.get(k).to_string());
        w.write_record([
            s.agent.clone(),
            s.run.to_string(),
            s.seed.to_string(),
            s.seeds.map_seed.to_string(),
            s.seeds.task_seed.to_string(),
            s.seeds.pedestrian_seed.to_string(),
            s.seeds.agent_seed.to_string(),
            o.map_or("Error".into(), |o| o.kind.name().to_string()),
            o.map_or(String::new(), |o| o.steps.to_string()),
            o.map_or(String::new(), |o| fmt_f(o.end_time)),
            o.map_or(String::new(), |o| o.completed.to_string()),
            o.map_or(String::new(), |o| o.total_tasks.to_string()),
            o.map_or(String::new(), |o| o.trace_hash.clone()),
            st.map_or(String::new(), |st| fmt_f(st.full_travel_distance)),
            kc(TaskKind::Fall),
            kc(TaskKind::Patrol),
            kc(TaskKind::Pick),
            kc(TaskKind::Place),
            kc(TaskKind::PickAndPlace),
            st.map_or(String::new(), |st| st.num_of_tasks_interrupted.total().to_string()),
            st.map_or(String::new(), |st| st.num_of_human_abandonement.to_string()),
            st.map_or(String::new(), |st| fmt_f(st.abandonment_distance)),
            st.and_then(StatRecord::mean_abs_deadline_delta)
                .map(fmt_f)
                .unwrap_or_default(),
            join(st.map(|s| &s.task_completion_to_deadline)),
            join(st.map(|s| &s.task_completion_to_deathtime)),
            format!("{:.3}", s.wall_time_ms),
            s.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome counts per agent as CSV.
pub fn write_histogram_csv<W: std::io::Write>(aggs: &[AgentAggregate], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["agent".to_string()];
    header.extend(OutcomeKind::ALL.iter().map(|k| k.name().to_string()));
    header.push("Error".into());
    w.write_record(&header)?;
    for a in aggs {
        let mut row = vec![a.agent.clone()];
        row.extend(OutcomeKind::ALL.iter().map(|k| a.outcomes.get(k).copied().unwrap_or(0).to_string()));
        row.push(a.errors.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn kind_color(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::Fall => "#d62728",
        TaskKind::Patrol => "#1f77b4",
        TaskKind::Pick => "#9467bd",
        TaskKind::Place => "#8c564b",
        TaskKind::PickAndPlace => "#2ca02c",
    }
}

fn outcome_color(kind: OutcomeKind) -> &'static str {
    match kind {
        OutcomeKind::AllCompleted => "#2ca02c",
        OutcomeKind::JobDied => "#d62728",
        OutcomeKind::Terminated => "#ff7f0e",
        OutcomeKind::TimedOut => "#7f7f7f",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Stacked bar per agent showing how its runs ended.
pub fn render_histogram(aggs: &[AgentAggregate]) -> String {
    let bar_w = 60.0;
    let gap = 40.0;
    let height = 240.0;
    let left = 50.0;
    let top = 20.0;
    let width = left + aggs.len() as f64 * (bar_w + gap) + 160.0;
    let total_h = top + height + 70.0;
    let max_runs = aggs.iter().map(|a| a.runs).max().unwrap_or(1).max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{total_h:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="black"/>"#,
        top + height
    );
    for (i, a) in aggs.iter().enumerate() {
        let x = left + gap / 2.0 + i as f64 * (bar_w + gap);
        let mut y = top + height;
        for k in OutcomeKind::ALL {
            let n = a.outcomes.get(&k).copied().unwrap_or(0) as f64;
            if n == 0.0 {
                continue;
            }
            let h = n / max_runs * height;
            y -= h;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{y:.1}" width="{bar_w:.1}" height="{h:.1}" fill="{}"><title>{} {}</title></rect>"#,
                outcome_color(k),
                k.name(),
                n
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" transform="rotate(-30 {:.1} {:.1})">{}</text>"#,
            x + bar_w / 2.0,
            top + height + 14.0,
            x + bar_w / 2.0,
            top + height + 14.0,
            escape(&a.agent)
        );
    }
    let lx = width - 140.0;
    for (j, k) in OutcomeKind::ALL.iter().enumerate() {
        let ly = top + j as f64 * 16.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{ly:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            outcome_color(*k),
            lx + 14.0,
            ly + 9.0,
            k.name()
        );
    }
    s.push_str("</svg>\n");
    s
}

/// A stretch of time during which the robot worked on one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: TaskId,
    pub start: f64,
    pub end: f64,
}

/// Maximal runs of consecutive steps that executed the same task.
pub fn course_segments(trace: &Trace) -> Vec<Segment> {
    let dt = trace.header.dt;
    let mut out: Vec<Segment> = Vec::new();
    let mut prev_step: Option<u64> = None;
    for e in &trace.events {
        let Some(id) = e.executed else {
            prev_step = None;
            continue;
        };
        let end = e.now + dt;
        match out.last_mut() {
            Some(seg) if seg.id == id && prev_step.is_some_and(|p| p + 1 == e.step) => seg.end = end,
            _ => out.push(Segment {
                id,
                start: e.now,
                end,
            }),
        }
        prev_step = Some(e.step);
    }
    out
}

/// Timeline of the active task: time on the x axis, one row per task
/// grouped by type and numbered in generation order.
pub fn render_course(trace: &Trace) -> String {
    let tasks = &trace.header.tasks;
    let mut rows: Vec<(TaskKind, usize, TaskId)> = Vec::new();
    let mut counters: BTreeMap<TaskKind, usize> = BTreeMap::new();
    for t in tasks {
        let n = counters.entry(t.kind).or_insert(0);
        rows.push((t.kind, *n, t.id));
        *n += 1;
    }
    rows.sort_by_key(|r| (r.0, r.1));
    let row_of: BTreeMap<TaskId, usize> = rows.iter().enumerate().map(|(i, r)| (r.2, i)).collect();

    let left = 110.0;
    let top = 20.0;
    let row_h = 14.0;
    let plot_w = 800.0;
    let plot_h = (rows.len().max(1)) as f64 * row_h;
    let width = left + plot_w + 20.0;
    let height = top + plot_h + 40.0;
    let horizon = trace.header.horizon.max(1e-9);
    let xs = |t: f64| left + t / horizon * plot_w;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left:.1}" y1="{top:.1}" x2="{left:.1}" y2="{:.1}" stroke="black"/>"#,
        top + plot_h
    );
    let ticks = 8;
    for i in 0..=ticks {
        let t = horizon * i as f64 / ticks as f64;
        let x = xs(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{:.0}</text>"#,
            top + plot_h,
            top + plot_h + 4.0,
            top + plot_h + 16.0,
            t
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time [s]</text>"#,
        left + plot_w / 2.0,
        top + plot_h + 32.0
    );
    for (i, (kind, n, id)) in rows.iter().enumerate() {
        let y = top + i as f64 * row_h;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{} {}</text>"#,
            left - 4.0,
            y + row_h * 0.75,
            kind.name(),
            n
        );
        if let Some(h) = tasks.iter().find(|t| t.id == *id) {
            let x = xs(h.deadline.min(horizon));
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{y:.1}" x2="{x:.1}" y2="{:.1}" stroke="{}" stroke-dasharray="2,2"/>"#,
                y + row_h,
                kind_color(*kind)
            );
        }
    }
    for seg in course_segments(trace) {
        let Some(&row) = row_of.get(&seg.id) else {
            continue;
        };
        let kind = rows[row].0;
        let y = top + row as f64 * row_h + 2.0;
        let x0 = xs(seg.start);
        let x1 = xs(seg.end.min(horizon));
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y:.1}" width="{:.2}" height="{:.1}" fill="{}"><title>#{} {:.0}-{:.0}</title></rect>"#,
            (x1 - x0).max(0.5),
            row_h - 4.0,
            kind_color(kind),
            seg.id.0,
            seg.start,
            seg.end
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Choice;
    use crate::engine::{StepEvent, TaskHeader, TraceHeader};
    use crate::geom::Point;

    fn header(n: u32) -> TraceHeader {
        TraceHeader {
            seeds: SeedSet::from_base(0),
            dt: 5.0,
            horizon: 100.0,
            tasks: (0..n)
                .map(|i| TaskHeader {
                    id: TaskId(i),
                    kind: TaskKind::Patrol,
                    request_time: 0.0,
                    deadline: 50.0,
                    deathtime: None,
                })
                .collect(),
        }
    }

    fn ev(step: u64, executed: Option<u32>) -> StepEvent {
        StepEvent {
            step,
            now: step as f64 * 5.0,
            robot: Point::new(0.0, 0.0),
            odometer: 0.0,
            admitted: vec![],
            jobs: vec![],
            decision: Choice::Idle,
            executed: executed.map(TaskId),
            overridden: false,
            stalled: false,
            completed: vec![],
            reward: None,
            terminate: false,
            outcome: None,
        }
    }

    #[test]
    fn empty_trace_draws_axes_only() {
        let t = Trace {
            header: header(0),
            events: vec![],
        };
        let svg = render_course(&t);
        assert!(svg.contains("<line"));
        assert!(!svg.contains("<rect"));
    }

    #[test]
    fn single_task_single_segment() {
        let t = Trace {
            header: header(1),
            events: vec![ev(0, Some(0)), ev(1, Some(0)), ev(2, Some(0))],
        };
        assert_eq!(
            course_segments(&t),
            vec![Segment {
                id: TaskId(0),
                start: 0.0,
                end: 15.0
            }]
        );
        assert_eq!(render_course(&t).matches("<rect").count(), 1);
    }

    #[test]
    fn identical_traces_identical_svg() {
        let t = Trace {
            header: header(2),
            events: vec![ev(0, Some(0)), ev(1, Some(1)), ev(2, None)],
        };
        assert_eq!(render_course(&t), render_course(&t.clone()));
    }

    #[test]
    fn seed_policies() {
        let plan = BenchmarkPlan {
            agents: vec![AgentSpec::Scheduler, AgentSpec::Idle],
            scenario: ScenarioConfig::default(),
            seed_policy: SeedPolicy::SharedAcrossAgents,
            runs: 3,
            base_seed: 1,
            stats: StatParams::default(),
            output_dir: None,
        };
        assert_eq!(plan.seed_for(0, 2), plan.seed_for(1, 2));
        let fresh = BenchmarkPlan {
            seed_policy: SeedPolicy::FreshPerRun,
            ..plan
        };
        assert_ne!(fresh.seed_for(0, 2), fresh.seed_for(1, 2));
    }
}
