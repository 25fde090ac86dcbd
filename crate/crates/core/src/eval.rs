//! Per-step evaluation functions.
//!
//! [`DqnEval`] turns each decision into a scalar reward for reinforcement
//! learning. [`StatEval`] accumulates benchmark statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentDecision, Choice};
use crate::engine::RobotState;
use crate::geom::Point;
use crate::tasks::{Task, TaskId, TaskKind};

/// Read-only view of the scenario handed to an eval function.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub now: f64,
    pub tasks: &'a [Task],
    pub jobs: &'a [TaskId],
    pub robot: &'a RobotState,
    /// Jobs removed as completed at the end of the previous step.
    pub just_completed: &'a [TaskId],
    /// Job the robot will work on this step, after the non-preemption rule.
    pub executed: Option<TaskId>,
}

impl StepContext<'_> {
    pub fn task(&self, id: TaskId) -> &Task {
        &self.tasks[id.0 as usize]
    }

    pub fn all_completed(&self) -> bool {
        self.tasks.iter().all(Task::is_completed)
    }

    pub fn any_dead(&self) -> bool {
        self.jobs.iter().any(|id| !self.task(*id).is_alive(self.now))
    }

    pub fn is_job(&self, id: TaskId) -> bool {
        self.jobs.contains(&id)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum EvalPayload {
    #[default]
    Empty,
    Reward(f64),
    Stats(Box<StatRecord>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalResult {
    pub terminate: bool,
    pub payload: EvalPayload,
}

impl EvalResult {
    pub fn reward(&self) -> Option<f64> {
        match self.payload {
            EvalPayload::Reward(r) => Some(r),
            _ => None,
        }
    }

    pub fn stats(&self) -> Option<&StatRecord> {
        match &self.payload {
            EvalPayload::Stats(s) => Some(s),
            _ => None,
        }
    }
}

pub trait EvalFunction {
    fn calculate_results(&mut self, decision: &AgentDecision, ctx: &StepContext) -> EvalResult;

    /// Called once after the last step.
    fn finish(&mut self, _ctx: &StepContext) {}
}

/// Never terminates and reports nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullEval;

impl EvalFunction for NullEval {
    fn calculate_results(&mut self, _decision: &AgentDecision, _ctx: &StepContext) -> EvalResult {
        EvalResult::default()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("{0} must be strictly positive")]
    RewardNotPositive(&'static str),
    #[error("{0} must be strictly negative")]
    PenaltyNotNegative(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    pub reward_all_complete: f64,
    pub penalty_dead_job: f64,
    pub reward_job_complete: f64,
    pub reward_real_job: f64,
    pub penalty_nonexistent_job: f64,
    pub penalty_change_job: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            reward_all_complete: 100.0,
            penalty_dead_job: -100.0,
            reward_job_complete: 10.0,
            reward_real_job: 1.0,
            penalty_nonexistent_job: -10.0,
            penalty_change_job: -1.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), RewardError> {
        let rewards = [
            ("reward_all_complete", self.reward_all_complete),
            ("reward_job_complete", self.reward_job_complete),
            ("reward_real_job", self.reward_real_job),
        ];
        for (name, v) in rewards {
            if !(v > 0.0 && v.is_finite()) {
                return Err(RewardError::RewardNotPositive(name));
            }
        }
        let penalties = [
            ("penalty_dead_job", self.penalty_dead_job),
            ("penalty_nonexistent_job", self.penalty_nonexistent_job),
            ("penalty_change_job", self.penalty_change_job),
        ];
        for (name, v) in penalties {
            if !(v < 0.0 && v.is_finite()) {
                return Err(RewardError::PenaltyNotNegative(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardCase {
    AllComplete,
    DeadJob,
    JobComplete,
    NoJobs,
    RealJob,
    NonexistentJob,
}

/// The reward ladder, evaluated top-down; the first matching case wins.
/// Returns `(reward, terminate, case)`.
pub fn dqn_reward(
    decision: Choice,
    ctx: &StepContext,
    params: &RewardParams,
    previous: Option<Choice>,
) -> (f64, bool, RewardCase) {
    if ctx.all_completed() {
        return (params.reward_all_complete, true, RewardCase::AllComplete);
    }
    if ctx.any_dead() {
        return (params.penalty_dead_job, true, RewardCase::DeadJob);
    }
    if !ctx.just_completed.is_empty() {
        return (params.reward_job_complete, false, RewardCase::JobComplete);
    }
    if ctx.jobs.is_empty() {
        return (0.0, false, RewardCase::NoJobs);
    }
    let changed = previous.is_some_and(|p| p != decision);
    let change = if changed { params.penalty_change_job } else { 0.0 };
    match decision {
        Choice::Job(id) if ctx.is_job(id) => (params.reward_real_job + change, false, RewardCase::RealJob),
        _ => (
            params.penalty_nonexistent_job + change,
            false,
            RewardCase::NonexistentJob,
        ),
    }
}

/// Reward function for training the DQN agent.
#[derive(Debug, Clone)]
pub struct DqnEval {
    pub params: RewardParams,
    previous: Option<Choice>,
    pub total_reward: f64,
}

impl DqnEval {
    /// Fails when any reward or penalty has the wrong sign.
    pub fn new(params: RewardParams) -> Result<Self, RewardError> {
        params.validate()?;
        Ok(Self {
            params,
            previous: None,
            total_reward: 0.0,
        })
    }
}

impl EvalFunction for DqnEval {
    fn calculate_results(&mut self, decision: &AgentDecision, ctx: &StepContext) -> EvalResult {
        let (r, terminate, _) = dqn_reward(decision.selected, ctx, &self.params, self.previous);
        self.previous = Some(decision.selected);
        self.total_reward += r;
        EvalResult {
            terminate,
            payload: EvalPayload::Reward(r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KindCounts {
    pub fall: u32,
    pub patrol: u32,
    pub pick: u32,
    pub place: u32,
    pub pick_and_place: u32,
}

impl KindCounts {
    pub fn get(&self, kind: TaskKind) -> u32 {
        match kind {
            TaskKind::Fall => self.fall,
            TaskKind::Patrol => self.patrol,
            TaskKind::Pick => self.pick,
            TaskKind::Place => self.place,
            TaskKind::PickAndPlace => self.pick_and_place,
        }
    }

    pub fn bump(&mut self, kind: TaskKind) {
        let slot = match kind {
            TaskKind::Fall => &mut self.fall,
            TaskKind::Patrol => &mut self.patrol,
            TaskKind::Pick => &mut self.pick,
            TaskKind::Place => &mut self.place,
            TaskKind::PickAndPlace => &mut self.pick_and_place,
        };
        *slot += 1;
    }

    pub fn total(&self) -> u32 {
        self.fall + self.patrol + self.pick + self.place + self.pick_and_place
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskDelta {
    pub id: TaskId,
    pub kind: TaskKind,
    /// Completion time minus the reference time; negative means early.
    pub seconds: f64,
}

/// Benchmark statistics for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRecord {
    pub full_travel_distance: f64,
    pub num_of_tasks_completed: KindCounts,
    pub task_completion_to_deadline: Vec<TaskDelta>,
    /// Only tasks that can die have an entry.
    pub task_completion_to_deathtime: Vec<TaskDelta>,
    pub num_of_tasks_interrupted: KindCounts,
    pub task_interruptions: BTreeMap<TaskId, u32>,
    pub num_of_human_abandonement: u32,
    pub abandonment_distance: f64,
    pub last_robot_pos: Option<Point>,
}

impl StatRecord {
    pub fn new(abandonment_distance: f64) -> Self {
        Self {
            full_travel_distance: 0.0,
            num_of_tasks_completed: KindCounts::default(),
            task_completion_to_deadline: Vec::new(),
            task_completion_to_deathtime: Vec::new(),
            num_of_tasks_interrupted: KindCounts::default(),
            task_interruptions: BTreeMap::new(),
            num_of_human_abandonement: 0,
            abandonment_distance,
            last_robot_pos: None,
        }
    }

    pub fn mean_abs_deadline_delta(&self) -> Option<f64> {
        let n = self.task_completion_to_deadline.len();
        (n > 0).then(|| {
            self.task_completion_to_deadline
                .iter()
                .map(|d| d.seconds.abs())
                .sum::<f64>()
                / n as f64
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatParams {
    pub abandonment_distance: f64,
    /// Length of the sliding window for the oscillation rule, seconds.
    pub oscillation_window: f64,
    /// Switches into the same task within the window that end the run.
    pub oscillation_limit: usize,
}

impl Default for StatParams {
    fn default() -> Self {
        Self {
            abandonment_distance: 1.0,
            oscillation_window: 180.0,
            oscillation_limit: 3,
        }
    }
}

/// Counts switches into each task and flags the one that hits `limit`
/// switches within `window` seconds.
#[derive(Debug, Clone, Default)]
pub struct OscillationDetector {
    window: f64,
    limit: usize,
    previous: Option<TaskId>,
    switches: HashMap<TaskId, VecDeque<f64>>,
}

impl OscillationDetector {
    pub fn new(window: f64, limit: usize) -> Self {
        Self {
            window,
            limit,
            previous: None,
            switches: HashMap::new(),
        }
    }

    /// Record the agent's selection at `now`. Returns true when it trips.
    pub fn observe(&mut self, now: f64, selected: Option<TaskId>) -> bool {
        let Some(id) = selected else {
            return false;
        };
        if self.previous == Some(id) {
            return false;
        }
        self.previous = Some(id);
        let log = self.switches.entry(id).or_default();
        log.push_back(now);
        while log.front().is_some_and(|t| now - t >= self.window) {
            log.pop_front();
        }
        log.len() >= self.limit
    }
}

/// Statistics collector used for benchmarking.
#[derive(Debug, Clone)]
pub struct StatEval {
    pub params: StatParams,
    pub record: StatRecord,
    oscillation: OscillationDetector,
    previous_executed: Option<TaskId>,
    near_falls: BTreeSet<TaskId>,
    counted: BTreeSet<TaskId>,
    pub oscillation_tripped: bool,
}

impl Default for StatEval {
    fn default() -> Self {
        StatEval::new(StatParams::default())
    }
}

impl StatEval {
    pub fn new(params: StatParams) -> Self {
        Self {
            params,
            record: StatRecord::new(params.abandonment_distance),
            oscillation: OscillationDetector::new(params.oscillation_window, params.oscillation_limit),
            previous_executed: None,
            near_falls: BTreeSet::new(),
            counted: BTreeSet::new(),
            oscillation_tripped: false,
        }
    }

    fn record_completions(&mut self, ctx: &StepContext) {
        let done: Vec<&Task> = ctx
            .tasks
            .iter()
            .filter(|t| t.is_completed() && !self.counted.contains(&t.id))
            .collect();
        for t in done {
            self.counted.insert(t.id);
            let at = t.completed_at.unwrap_or(ctx.now);
            self.record.num_of_tasks_completed.bump(t.kind);
            self.record.task_completion_to_deadline.push(TaskDelta {
                id: t.id,
                kind: t.kind,
                seconds: at - t.deadline,
            });
            if let Some(death) = t.deathtime {
                self.record.task_completion_to_deathtime.push(TaskDelta {
                    id: t.id,
                    kind: t.kind,
                    seconds: at - death,
                });
            }
        }
    }

    fn record_motion(&mut self, ctx: &StepContext) {
        self.record.full_travel_distance = self.record.full_travel_distance.max(ctx.robot.odometer);
        self.record.last_robot_pos = Some(ctx.robot.pose);
    }
}

impl EvalFunction for StatEval {
    fn calculate_results(&mut self, decision: &AgentDecision, ctx: &StepContext) -> EvalResult {
        self.record_motion(ctx);
        self.record_completions(ctx);

        if let Some(prev) = self.previous_executed {
            if ctx.executed != Some(prev) && ctx.is_job(prev) {
                let t = ctx.task(prev);
                if t.preemptive && t.started && !t.is_completed() {
                    self.record.num_of_tasks_interrupted.bump(t.kind);
                    *self.record.task_interruptions.entry(prev).or_insert(0) += 1;
                }
            }
        }
        if ctx.executed.is_some() {
            self.previous_executed = ctx.executed;
        }

        let reach = self.params.abandonment_distance;
        let mut near = BTreeSet::new();
        for id in ctx.jobs {
            let t = ctx.task(*id);
            if t.kind != TaskKind::Fall || t.is_completed() {
                continue;
            }
            let Some(target) = t.current_target() else {
                continue;
            };
            if ctx.robot.pose.dist(target) <= reach {
                near.insert(*id);
                if ctx.executed != Some(*id) && !self.near_falls.contains(id) {
                    self.record.num_of_human_abandonement += 1;
                }
            }
        }
        self.near_falls = near;

        let tripped = self.oscillation.observe(ctx.now, decision.selected.job());
        self.oscillation_tripped |= tripped;
        let terminate = ctx.all_completed() || ctx.any_dead() || tripped;
        EvalResult {
            terminate,
            payload: EvalPayload::Stats(Box::new(self.record.clone())),
        }
    }

    fn finish(&mut self, ctx: &StepContext) {
        self.record_motion(ctx);
        self.record_completions(ctx);
    }
}
