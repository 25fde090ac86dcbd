//! Scenario main loop.
//!
//! Each step runs these phases in order:
//!
//! 1. admit newly called tasks into the jobs list;
//! 2. refresh every job (distance and duration estimates, then plugins, then
//!    the deathtime);
//! 3. ask the agent for a decision;
//! 4. evaluate the decision;
//! 5. execute one `dt` of work on the chosen job;
//! 6. step pedestrians and rebuild the dynamic occupancy layer;
//! 7. drop completed jobs;
//! 8. advance the clock.
//!
//! A scenario ends when every task is complete, any job has died, the eval
//! function asks to terminate, or the horizon is reached. The ending step
//! stops after phase 4 and does not advance the clock.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{AgentDecision, Choice, DecisionAgent};
use crate::crowd::{spawn_pedestrians, CrowdParams, PedestrianState};
use crate::determinism::{split, SeedSet, Stream};
use crate::eval::{EvalFunction, EvalResult, StepContext};
use crate::geom::Point;
use crate::navgrid::{DistanceField, OccupancyView, StaticField};
use crate::tasks::{generate_tasks, Task, TaskGenError, TaskGenParams, TaskId, TaskKind, WorkError};
use crate::worldgen::{generate_environment, EnvParams, EnvironmentMap, WorldgenError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Worldgen(#[from] WorldgenError),
    #[error(transparent)]
    TaskGen(#[from] TaskGenError),
}

impl EngineError {
    /// True for failures of seeded generation rather than of the config.
    pub fn is_generation_failure(&self) -> bool {
        matches!(
            self,
            EngineError::Worldgen(WorldgenError::GenerationFailed(_))
                | EngineError::Worldgen(WorldgenError::AllZeroWeights)
                | EngineError::TaskGen(TaskGenError::GenerationFailed(_))
        )
    }
}

/// Point robot with a fixed travel speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Point,
    /// m/s.
    pub velocity: f64,
    pub active_task: Option<TaskId>,
    /// Total distance traveled, m.
    pub odometer: f64,
}

impl RobotState {
    pub fn new(pose: Point, velocity: f64) -> Self {
        Self {
            pose,
            velocity,
            active_task: None,
            odometer: 0.0,
        }
    }

    /// Move toward `target` along a freshly planned path for at most
    /// `budget` seconds. Returns the time spent moving.
    pub fn travel(
        &mut self,
        view: &OccupancyView,
        target: Point,
        budget: f64,
    ) -> Result<f64, WorkError> {
        let path = view
            .plan_path(self.pose, target)
            .map_err(|_| WorkError::TargetUnreachable)?;
        let mut poly = Vec::with_capacity(path.waypoints.len() + 1);
        poly.extend(path.waypoints.iter().skip(1).copied());
        if poly.last().is_none_or(|p| p.dist(target) > 1e-12) {
            poly.push(target);
        }
        let mut left = self.velocity * budget;
        let mut moved = 0.0;
        for wp in poly {
            if left <= 0.0 {
                break;
            }
            let d = self.pose.dist(wp);
            if d <= left {
                self.pose = wp;
                left -= d;
                moved += d;
            } else {
                self.pose = self.pose.toward(wp, left);
                moved += left;
                left = 0.0;
            }
        }
        self.odometer += moved;
        Ok(if self.velocity > 0.0 {
            moved / self.velocity
        } else {
            0.0
        })
    }
}

/// Per-job hook run after the built-in estimates each step.
pub trait ScenarioPlugin: Send {
    fn name(&self) -> &str;
    fn update_job(&mut self, task: &mut Task, now: f64);
}

/// Multiplies `estimated_duration` by a mean-one log-normal factor.
#[derive(Debug, Clone)]
pub struct DurationNoisePlugin {
    std: f64,
    stream: Stream,
}

impl DurationNoisePlugin {
    pub fn new(std: f64, seed: u64) -> Self {
        assert!(std >= 0.0 && std.is_finite(), "noise std must be non-negative");
        Self {
            std,
            stream: Stream::new(seed),
        }
    }

    pub fn factor(&mut self) -> f64 {
        if self.std == 0.0 {
            return 1.0;
        }
        let z = self.stream.normal();
        (self.std * z - self.std * self.std / 2.0).exp()
    }
}

impl ScenarioPlugin for DurationNoisePlugin {
    fn name(&self) -> &str {
        "duration-noise"
    }

    fn update_job(&mut self, task: &mut Task, _now: f64) {
        if self.std == 0.0 || !task.estimated_duration.is_finite() {
            return;
        }
        task.estimated_duration = (task.estimated_duration * self.factor()).max(0.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PluginSpec {
    DurationNoise { std: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Base seed expanded into a [`SeedSet`] unless `seeds` is given.
    pub seed: u64,
    pub seeds: Option<SeedSet>,
    pub env: EnvParams,
    /// The generation window is always the scenario horizon.
    pub tasks: TaskGenParams,
    pub crowd: CrowdParams,
    pub dt: f64,
    pub horizon: f64,
    pub robot_velocity: f64,
    pub min_task_duration: f64,
    /// Extra clearance added to pedestrian discs, m.
    pub inflation: f64,
    pub plugins: Vec<PluginSpec>,
    /// Keep per-step events in memory. The trace hash is computed either way.
    pub record_trace: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            seeds: None,
            env: EnvParams::default(),
            tasks: TaskGenParams::default(),
            crowd: CrowdParams::default(),
            dt: 5.0,
            horizon: 14_400.0,
            robot_velocity: 0.3,
            min_task_duration: 0.0,
            inflation: 0.2,
            plugins: Vec::new(),
            record_trace: true,
        }
    }
}

impl ScenarioConfig {
    pub fn seed_set(&self) -> SeedSet {
        self.seeds.unwrap_or_else(|| SeedSet::from_base(self.seed))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.seeds = None;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidConfig(m.to_string()));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad("horizon must be positive");
        }
        if !(self.robot_velocity.is_finite() && self.robot_velocity > 0.0) {
            return bad("robot velocity must be positive");
        }
        if !(self.min_task_duration.is_finite() && self.min_task_duration >= 0.0) {
            return bad("min_task_duration must be non-negative");
        }
        if !(self.inflation.is_finite() && self.inflation >= 0.0) {
            return bad("inflation must be non-negative");
        }
        for p in &self.plugins {
            let PluginSpec::DurationNoise { std } = p;
            if !(std.is_finite() && *std >= 0.0) {
                return bad("noise std must be non-negative");
            }
        }
        self.env.validate()?;
        self.task_params().validate()?;
        Ok(())
    }

    pub fn task_params(&self) -> TaskGenParams {
        TaskGenParams {
            horizon: self.horizon,
            ..self.tasks.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeKind {
    AllCompleted,
    JobDied,
    Terminated,
    TimedOut,
}

impl OutcomeKind {
    pub const ALL: [OutcomeKind; 4] = [
        OutcomeKind::AllCompleted,
        OutcomeKind::JobDied,
        OutcomeKind::Terminated,
        OutcomeKind::TimedOut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OutcomeKind::AllCompleted => "AllCompleted",
            OutcomeKind::JobDied => "JobDied",
            OutcomeKind::Terminated => "Terminated",
            OutcomeKind::TimedOut => "TimedOut",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub kind: OutcomeKind,
    pub steps: u64,
    pub end_time: f64,
    pub completed: usize,
    pub total_tasks: usize,
    pub trace_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub id: TaskId,
    pub at: f64,
}

/// One line of the JSON Lines trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub step: u64,
    pub now: f64,
    pub robot: Point,
    pub odometer: f64,
    pub admitted: Vec<TaskId>,
    pub jobs: Vec<TaskId>,
    pub decision: Choice,
    pub executed: Option<TaskId>,
    /// The executed job differs from the agent's choice.
    pub overridden: bool,
    pub stalled: bool,
    pub completed: Vec<Completion>,
    pub reward: Option<f64>,
    pub terminate: bool,
    pub outcome: Option<OutcomeKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskHeader {
    pub id: TaskId,
    pub kind: TaskKind,
    pub request_time: f64,
    pub deadline: f64,
    pub deathtime: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub seeds: SeedSet,
    pub dt: f64,
    pub horizon: f64,
    pub tasks: Vec<TaskHeader>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<StepEvent>,
}

impl Trace {
    /// Header line followed by one event per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        out.write_all(b"\n")?;
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> std::io::Result<Trace> {
        let mut lines = input.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "empty trace"))??;
        let header: TraceHeader = serde_json::from_str(&header_line)?;
        let mut events = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line)?);
        }
        Ok(Trace { header, events })
    }
}

fn header_for(seeds: SeedSet, dt: f64, horizon: f64, tasks: &[Task]) -> TraceHeader {
    TraceHeader {
        seeds,
        dt,
        horizon,
        tasks: tasks
            .iter()
            .map(|t| TaskHeader {
                id: t.id,
                kind: t.kind,
                request_time: t.request_time,
                deadline: t.deadline,
                deathtime: t.deathtime,
            })
            .collect(),
    }
}

/// A live scenario. Task ids equal their index in `tasks`.
pub struct Scenario {
    pub seeds: SeedSet,
    pub now: f64,
    pub dt: f64,
    pub horizon: f64,
    pub step_count: u64,
    pub tasks: Vec<Task>,
    /// Ascending ids of called, incomplete tasks.
    pub jobs: Vec<TaskId>,
    pub robot: RobotState,
    pub pedestrians: Vec<PedestrianState>,
    pub last_eval: EvalResult,
    pub just_completed: Vec<TaskId>,
    min_task_duration: f64,
    inflation: f64,
    view: OccupancyView,
    statics: OccupancyView,
    plugins: Vec<Box<dyn ScenarioPlugin>>,
    leg_cache: HashMap<(usize, usize), f64>,
    robot_field: Option<StaticField>,
    hasher: Sha256,
    header: TraceHeader,
    events: Option<Vec<StepEvent>>,
    outcome: Option<OutcomeKind>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("now", &self.now)
            .field("jobs", &self.jobs)
            .field("robot", &self.robot)
            .field("outcome", &self.outcome)
            .finish_non_exhaustive()
    }
}

impl Scenario {
    /// Build map, tasks and pedestrians from the config's seeds.
    pub fn new(cfg: &ScenarioConfig) -> Result<Scenario, EngineError> {
        cfg.validate()?;
        let seeds = cfg.seed_set();
        let map = Arc::new(generate_environment(&cfg.env, seeds.map_seed)?);
        let tasks = generate_tasks(&cfg.task_params(), &map, seeds.task_seed)?;
        Scenario::with_tasks(cfg, map, tasks)
    }

    /// Build a scenario on a given map and task list. Pedestrians still come
    /// from the config's pedestrian seed.
    pub fn with_tasks(
        cfg: &ScenarioConfig,
        map: Arc<EnvironmentMap>,
        tasks: Vec<Task>,
    ) -> Result<Scenario, EngineError> {
        cfg.validate()?;
        for (i, t) in tasks.iter().enumerate() {
            if t.id != TaskId(i as u32) {
                return Err(EngineError::InvalidConfig(format!(
                    "task at position {i} has id {}; ids must be 0..n in order",
                    t.id.0
                )));
            }
        }
        let seeds = cfg.seed_set();
        let statics = OccupancyView::new(map.clone());
        let ped_stream = Stream::new(seeds.pedestrian_seed);
        let pedestrians = spawn_pedestrians(&cfg.crowd, &map.spawn_prob, &statics, &ped_stream);
        let mut view = statics.clone();
        view.embed_pedestrians(&pedestrians, cfg.inflation);
        let plugins = cfg
            .plugins
            .iter()
            .enumerate()
            .map(|(i, p)| match p {
                PluginSpec::DurationNoise { std } => {
                    let seed = split(seeds.task_seed, &format!("plugin-{i}")).expect("label");
                    Box::new(DurationNoisePlugin::new(*std, seed)) as Box<dyn ScenarioPlugin>
                }
            })
            .collect();
        let robot = RobotState::new(map.center(map.dock_cell()), cfg.robot_velocity);
        let header = header_for(seeds, cfg.dt, cfg.horizon, &tasks);
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&header).expect("header serializes"));
        Ok(Scenario {
            seeds,
            now: 0.0,
            dt: cfg.dt,
            horizon: cfg.horizon,
            step_count: 0,
            tasks,
            jobs: Vec::new(),
            robot,
            pedestrians,
            last_eval: EvalResult::default(),
            just_completed: Vec::new(),
            min_task_duration: cfg.min_task_duration,
            inflation: cfg.inflation,
            view,
            statics,
            plugins,
            leg_cache: HashMap::new(),
            robot_field: None,
            hasher,
            header,
            events: cfg.record_trace.then(Vec::new),
            outcome: None,
        })
    }

    pub fn add_plugin(&mut self, plugin: Box<dyn ScenarioPlugin>) {
        self.plugins.push(plugin);
    }

    pub fn map(&self) -> &EnvironmentMap {
        self.view.map()
    }

    pub fn map_arc(&self) -> &Arc<EnvironmentMap> {
        self.view.map_arc()
    }

    pub fn view(&self) -> &OccupancyView {
        &self.view
    }

    pub fn outcome(&self) -> Option<OutcomeKind> {
        self.outcome
    }

    pub fn task(&self, id: TaskId) -> &Task {
        &self.tasks[id.0 as usize]
    }

    pub fn job_snapshot(&self) -> Vec<Task> {
        self.jobs.iter().map(|id| self.task(*id).clone()).collect()
    }

    pub fn completed_count(&self) -> usize {
        self.tasks.iter().filter(|t| t.is_completed()).count()
    }

    fn admit(&mut self) -> Vec<TaskId> {
        let mut admitted = Vec::new();
        for t in &self.tasks {
            if t.is_called(self.now) && !t.is_completed() && self.jobs.binary_search(&t.id).is_err() {
                admitted.push(t.id);
            }
        }
        self.jobs.extend(&admitted);
        self.jobs.sort_unstable();
        admitted
    }

    /// Phase 2: distance and duration estimates, plugins, deathtime.
    pub fn update_jobs(&mut self) {
        if self.jobs.is_empty() {
            return;
        }
        let pose = self.robot.pose;
        let velocity = self.robot.velocity;
        let map = self.view.map();
        let source = map.index(map.cell_of(pose));
        if self.robot_field.as_ref().is_none_or(|f| f.source() != source) {
            self.robot_field = Some(StaticField::new(&self.view, pose));
        }
        let tree = self.robot_field.as_ref().expect("field built above");
        let view = &self.view;
        let mut dynamic: Option<DistanceField> = None;
        let mut first_leg = |p: Point| {
            tree.length_if_clear(view, p)
                .unwrap_or_else(|| dynamic.get_or_insert_with(|| view.distance_field(pose)).length_to(p))
        };
        let statics = &self.statics;
        let cache = &mut self.leg_cache;
        for id in &self.jobs {
            let t = &mut self.tasks[id.0 as usize];
            t.distance_from_robot = match t.current_target() {
                Some(p) if p.dist(pose) < 1e-9 => 0.0,
                Some(p) => first_leg(p),
                None => f64::INFINITY,
            };
            t.refresh_estimate(pose, velocity, self.min_task_duration, &mut |a, b, first| {
                if first {
                    first_leg(b)
                } else {
                    let key = (map.index(map.cell_of(a)), map.index(map.cell_of(b)));
                    *cache.entry(key).or_insert_with(|| statics.path_length(a, b))
                }
            });
            for p in &mut self.plugins {
                p.update_job(t, self.now);
            }
            t.recompute_deathtime();
        }
    }

    fn resolve_execution(&self, decision: &AgentDecision) -> (Choice, Option<TaskId>) {
        let in_jobs = |id: TaskId| self.jobs.binary_search(&id).is_ok();
        let choice = match decision.selected {
            Choice::Job(id) if !in_jobs(id) => Choice::Nonexistent,
            c => c,
        };
        if let Some(active) = self.robot.active_task.filter(|id| in_jobs(*id)) {
            let t = self.task(active);
            if !t.preemptive && t.started && !t.is_completed() && t.is_alive(self.now) {
                return (choice, Some(active));
            }
        }
        let executed = match choice {
            Choice::Job(id) => Some(id),
            _ => None,
        };
        (choice, executed)
    }

    fn finish_event(&mut self, event: StepEvent) {
        let line = serde_json::to_vec(&event).expect("event serializes");
        self.hasher.update(b"\n");
        self.hasher.update(&line);
        if let Some(ev) = &mut self.events {
            ev.push(event);
        }
    }

    /// Run one step. Returns the outcome when the scenario ends.
    pub fn step(
        &mut self,
        agent: &mut dyn DecisionAgent,
        eval: &mut dyn EvalFunction,
    ) -> Option<OutcomeKind> {
        if let Some(o) = self.outcome {
            return Some(o);
        }
        let admitted = self.admit();
        self.update_jobs();

        let snapshot = self.job_snapshot();
        let decision = agent.select_task(&snapshot, self.now, &self.last_eval);
        let (choice, executed) = self.resolve_execution(&decision);
        let checked = AgentDecision {
            selected: choice,
            considered: decision.considered,
        };

        let ctx = StepContext {
            now: self.now,
            tasks: &self.tasks,
            jobs: &self.jobs,
            robot: &self.robot,
            just_completed: &self.just_completed,
            executed,
        };
        let result = eval.calculate_results(&checked, &ctx);

        let all_done = self.tasks.iter().all(Task::is_completed);
        let died = self.jobs.iter().any(|id| !self.task(*id).is_alive(self.now));
        let ending = if all_done {
            Some(OutcomeKind::AllCompleted)
        } else if died {
            Some(OutcomeKind::JobDied)
        } else if result.terminate {
            Some(OutcomeKind::Terminated)
        } else {
            None
        };

        let mut event = StepEvent {
            step: self.step_count,
            now: self.now,
            robot: self.robot.pose,
            odometer: self.robot.odometer,
            admitted,
            jobs: self.jobs.clone(),
            decision: checked.selected,
            executed,
            overridden: executed != checked.selected.job(),
            stalled: false,
            completed: Vec::new(),
            reward: result.reward(),
            terminate: result.terminate,
            outcome: ending,
        };
        self.last_eval = result;

        if let Some(kind) = ending {
            event.executed = None;
            event.overridden = false;
            self.finish_event(event);
            self.outcome = Some(kind);
            return Some(kind);
        }

        if let Some(id) = executed {
            let t = &mut self.tasks[id.0 as usize];
            match t.work(&mut self.robot, &self.view, self.dt) {
                Ok(used) => {
                    if t.is_completed() {
                        t.completed_at = Some(self.now + used);
                    }
                }
                Err(WorkError::TargetUnreachable) => event.stalled = true,
            }
            self.robot.active_task = Some(id);
        }
        event.robot = self.robot.pose;
        event.odometer = self.robot.odometer;

        let map = self.statics.map_arc().clone();
        for p in &mut self.pedestrians {
            p.step(&self.statics, &map.spawn_prob, self.dt);
        }
        self.view.clear_dynamic();
        self.view.embed_pedestrians(&self.pedestrians, self.inflation);

        self.just_completed.clear();
        let tasks = &self.tasks;
        let just = &mut self.just_completed;
        self.jobs.retain(|id| {
            let t = &tasks[id.0 as usize];
            if t.is_completed() {
                just.push(*id);
                false
            } else {
                true
            }
        });
        for id in &self.just_completed {
            event.completed.push(Completion {
                id: *id,
                at: self.task(*id).completed_at.unwrap_or(self.now),
            });
        }
        if self
            .robot
            .active_task
            .is_some_and(|id| self.task(id).is_completed())
        {
            self.robot.active_task = None;
        }

        self.step_count += 1;
        self.now = self.step_count as f64 * self.dt;
        if self.now >= self.horizon - 1e-9 {
            let kind = if self.tasks.iter().all(Task::is_completed) {
                OutcomeKind::AllCompleted
            } else {
                OutcomeKind::TimedOut
            };
            event.outcome = Some(kind);
            self.outcome = Some(kind);
        }
        self.finish_event(event);
        self.outcome
    }

    pub fn trace_hash(&self) -> String {
        let digest = self.hasher.clone().finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Most recent step event, when traces are recorded.
    pub fn last_event(&self) -> Option<&StepEvent> {
        self.events.as_ref().and_then(|e| e.last())
    }

    pub fn trace(&self) -> Option<Trace> {
        self.events.as_ref().map(|events| Trace {
            header: self.header.clone(),
            events: events.clone(),
        })
    }

    pub fn take_trace(&mut self) -> Option<Trace> {
        self.events.take().map(|events| Trace {
            header: self.header.clone(),
            events,
        })
    }

    /// Step until the scenario ends.
    pub fn run(
        &mut self,
        agent: &mut dyn DecisionAgent,
        eval: &mut dyn EvalFunction,
    ) -> ScenarioOutcome {
        let kind = loop {
            if let Some(k) = self.step(agent, eval) {
                break k;
            }
        };
        let ctx = StepContext {
            now: self.now,
            tasks: &self.tasks,
            jobs: &self.jobs,
            robot: &self.robot,
            just_completed: &self.just_completed,
            executed: None,
        };
        eval.finish(&ctx);
        agent.end_episode(&self.last_eval);
        ScenarioOutcome {
            kind,
            steps: self.step_count,
            end_time: self.now,
            completed: self.completed_count(),
            total_tasks: self.tasks.len(),
            trace_hash: self.trace_hash(),
        }
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub outcome: ScenarioOutcome,
    pub trace: Option<Trace>,
    pub last_eval: EvalResult,
    pub tasks: Vec<Task>,
}

/// Build a scenario from `cfg` and run it to the end.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    agent: &mut dyn DecisionAgent,
    eval: &mut dyn EvalFunction,
) -> Result<RunOutput, EngineError> {
    let mut sc = Scenario::new(cfg)?;
    let outcome = sc.run(agent, eval);
    Ok(RunOutput {
        outcome,
        trace: sc.take_trace(),
        last_eval: sc.last_eval.clone(),
        tasks: std::mem::take(&mut sc.tasks),
    })
}
