//! Decision agents: given the current jobs, pick one for the robot.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::determinism::Stream;
use crate::dqn::{DqnError, DqnHyper, Learner, Mlp, Transition};
use crate::eval::EvalResult;
use crate::tasks::{Task, TaskId, TaskKind};

/// What an agent asks the robot to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    Idle,
    Job(TaskId),
    /// A selection that does not name any current job.
    Nonexistent,
}

impl Choice {
    pub fn job(self) -> Option<TaskId> {
        match self {
            Choice::Job(id) => Some(id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDecision {
    pub selected: Choice,
    /// Jobs the agent actually looked at, in its own order.
    pub considered: Vec<TaskId>,
}

impl AgentDecision {
    pub fn idle() -> Self {
        Self {
            selected: Choice::Idle,
            considered: Vec::new(),
        }
    }

    fn pick(selected: Option<TaskId>, jobs: &[Task]) -> Self {
        Self {
            selected: selected.map_or(Choice::Idle, Choice::Job),
            considered: jobs.iter().map(|t| t.id).collect(),
        }
    }
}

pub trait DecisionAgent {
    fn name(&self) -> &str;

    fn select_task(&mut self, jobs: &[Task], now: f64, last_eval: &EvalResult) -> AgentDecision;

    /// Called once after the scenario's last step.
    fn end_episode(&mut self, _last_eval: &EvalResult) {}
}

/// Never selects anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdleAgent;

impl DecisionAgent for IdleAgent {
    fn name(&self) -> &str {
        "idle"
    }

    fn select_task(&mut self, _jobs: &[Task], _now: f64, _last: &EvalResult) -> AgentDecision {
        AgentDecision::idle()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimpleMode {
    Longest,
    Shortest,
}

/// Pick the job with the longest or shortest estimate. Ties go to the
/// lowest id; infinite estimates are skipped.
pub fn simple_pick(jobs: &[Task], mode: SimpleMode) -> Option<TaskId> {
    let mut best: Option<&Task> = None;
    for t in jobs.iter().filter(|t| t.estimated_duration.is_finite()) {
        let better = match best {
            None => true,
            Some(b) => {
                let ord = t.estimated_duration.total_cmp(&b.estimated_duration);
                let wins = match mode {
                    SimpleMode::Longest => ord.is_gt(),
                    SimpleMode::Shortest => ord.is_lt(),
                };
                wins || (ord.is_eq() && t.id < b.id)
            }
        };
        if better {
            best = Some(t);
        }
    }
    best.map(|t| t.id)
}

/// One simple-agent decision. With probability `hesitance` the previous
/// selection is repeated, provided it is still a job.
pub fn simple_select(
    jobs: &[Task],
    mode: SimpleMode,
    hesitance: f64,
    stream: &mut Stream,
    prev: Option<TaskId>,
) -> AgentDecision {
    if let Some(p) = prev.filter(|p| jobs.iter().any(|t| t.id == *p)) {
        if stream.chance(hesitance) {
            return AgentDecision {
                selected: Choice::Job(p),
                considered: vec![p],
            };
        }
    }
    AgentDecision::pick(simple_pick(jobs, mode), jobs)
}

#[derive(Debug, Clone)]
pub struct SimpleAgent {
    pub mode: SimpleMode,
    pub hesitance: f64,
    stream: Stream,
    prev: Option<TaskId>,
    name: String,
}

impl SimpleAgent {
    pub fn new(mode: SimpleMode, hesitance: f64, seed: u64) -> Self {
        assert!((0.0..=1.0).contains(&hesitance), "hesitance must lie in [0, 1]");
        let name = match mode {
            SimpleMode::Longest => "simple-longest",
            SimpleMode::Shortest => "simple-shortest",
        };
        Self {
            mode,
            hesitance,
            stream: Stream::new(seed),
            prev: None,
            name: name.to_string(),
        }
    }
}

impl DecisionAgent for SimpleAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn select_task(&mut self, jobs: &[Task], _now: f64, _last: &EvalResult) -> AgentDecision {
        let d = simple_select(jobs, self.mode, self.hesitance, &mut self.stream, self.prev);
        self.prev = d.selected.job();
        d
    }
}

/// `distance_from_robot - ratio * estimated_duration`.
pub fn dist_score(distance: f64, duration: f64, ratio: f64) -> f64 {
    distance - ratio * duration
}

/// Highest [`dist_score`]; jobs with a non-finite distance or estimate are
/// skipped, ties go to the lowest id.
pub fn distance_select(jobs: &[Task], ratio: f64) -> AgentDecision {
    let mut best: Option<(f64, TaskId)> = None;
    for t in jobs {
        if !(t.distance_from_robot.is_finite() && t.estimated_duration.is_finite()) {
            continue;
        }
        let s = dist_score(t.distance_from_robot, t.estimated_duration, ratio);
        if best.is_none_or(|(bs, bid)| s > bs || (s == bs && t.id < bid)) {
            best = Some((s, t.id));
        }
    }
    AgentDecision::pick(best.map(|b| b.1), jobs)
}

#[derive(Debug, Clone)]
pub struct DistanceAgent {
    pub ratio: f64,
}

impl DistanceAgent {
    pub fn new(ratio: f64) -> Self {
        assert!(ratio >= 0.0 && ratio.is_finite(), "ratio must be non-negative");
        Self { ratio }
    }
}

impl DecisionAgent for DistanceAgent {
    fn name(&self) -> &str {
        "distance"
    }

    fn select_task(&mut self, jobs: &[Task], _now: f64, _last: &EvalResult) -> AgentDecision {
        distance_select(jobs, self.ratio)
    }
}

/// Helper run by an agent before it decides.
pub trait AgentPlugin {
    type Output;
    fn name(&self) -> &str;
    fn process(&mut self, jobs: &[Task], now: f64) -> Self::Output;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub id: TaskId,
    pub start: f64,
    pub end: f64,
}

impl Slot {
    pub fn overlaps(&self, other: &Slot) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScheduleTable {
    pub scheduled: Vec<Slot>,
    pub rejected: Vec<TaskId>,
}

/// Greedy table: jobs sorted by priority (high first), request time, id.
/// Each job wants `[deadline - estimate, deadline]`; it is rejected when
/// that overlaps anything already scheduled or the estimate is infinite.
/// A `pinned` slot is placed first, ahead of the sort.
pub fn request_table_pinned(jobs: &[Task], pinned: Option<Slot>) -> ScheduleTable {
    let mut table = ScheduleTable::default();
    if let Some(p) = pinned {
        table.scheduled.push(p);
    }
    let mut order: Vec<&Task> = jobs
        .iter()
        .filter(|t| pinned.is_none_or(|p| p.id != t.id))
        .collect();
    order.sort_by(|a, b| {
        b.priority
            .cmp(&a.priority)
            .then(a.request_time.total_cmp(&b.request_time))
            .then(a.id.cmp(&b.id))
    });
    for t in order {
        if !t.estimated_duration.is_finite() {
            table.rejected.push(t.id);
            continue;
        }
        let slot = Slot {
            id: t.id,
            start: t.deadline - t.estimated_duration,
            end: t.deadline,
        };
        if table.scheduled.iter().any(|s| s.overlaps(&slot)) {
            table.rejected.push(t.id);
        } else {
            table.scheduled.push(slot);
        }
    }
    table
}

pub fn request_table(jobs: &[Task], _now: f64) -> ScheduleTable {
    request_table_pinned(jobs, None)
}

/// The scheduled job whose slot contains `now`.
pub fn scheduler_select(jobs: &[Task], now: f64, table: &ScheduleTable) -> AgentDecision {
    let hit = table
        .scheduled
        .iter()
        .filter(|s| s.contains(now))
        .min_by_key(|s| s.id)
        .map(|s| s.id);
    AgentDecision {
        selected: hit.map_or(Choice::Idle, Choice::Job),
        considered: table.scheduled.iter().map(|s| s.id).filter(|id| jobs.iter().any(|t| t.id == *id)).collect(),
    }
}

/// Request-table plugin that remembers the slot of the job being executed.
#[derive(Debug, Clone, Default)]
pub struct RequestTable {
    pinned: Option<Slot>,
}

impl RequestTable {
    /// Keep executing `id` in the slot it started in; if the remaining work
    /// no longer fits before the slot end, the slot is stretched to cover it.
    pub fn pin(&mut self, slot: Option<Slot>) {
        self.pinned = slot;
    }

    fn pinned_for(&self, jobs: &[Task], now: f64) -> Option<Slot> {
        let p = self.pinned?;
        let t = jobs.iter().find(|t| t.id == p.id)?;
        if !t.estimated_duration.is_finite() {
            return None;
        }
        Some(Slot {
            id: p.id,
            start: p.start.min(now),
            end: p.end.max(now + t.estimated_duration),
        })
    }
}

impl AgentPlugin for RequestTable {
    type Output = ScheduleTable;

    fn name(&self) -> &str {
        "request-table"
    }

    fn process(&mut self, jobs: &[Task], now: f64) -> ScheduleTable {
        let pinned = self.pinned_for(jobs, now);
        request_table_pinned(jobs, pinned)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SchedulerAgent {
    table: RequestTable,
    pub last_table: ScheduleTable,
}

impl SchedulerAgent {
    pub fn new() -> Self {
        Self::default()
    }
}

impl DecisionAgent for SchedulerAgent {
    fn name(&self) -> &str {
        "scheduler"
    }

    fn select_task(&mut self, jobs: &[Task], now: f64, _last: &EvalResult) -> AgentDecision {
        let table = self.table.process(jobs, now);
        let d = scheduler_select(jobs, now, &table);
        let slot = d
            .selected
            .job()
            .and_then(|id| table.scheduled.iter().find(|s| s.id == id).copied());
        self.table.pin(slot);
        self.last_table = table;
        d
    }
}

/// Task types in the order of the encoder's bands.
pub const DQN_BANDS: [TaskKind; 3] = [TaskKind::Fall, TaskKind::Patrol, TaskKind::PickAndPlace];
pub const DQN_FEATURES: usize = 3;

/// Normalization of encoder features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodeScale {
    /// Seconds mapped to 1.0.
    pub duration: f64,
    /// Meters mapped to 1.0; usually the map diagonal.
    pub distance: f64,
}

impl EncodeScale {
    pub fn for_diagonal(diagonal: f64) -> Self {
        Self {
            duration: 3600.0,
            distance: diagonal,
        }
    }
}

/// Network input and the job behind each output slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    /// Flattened `[band][slot][feature]`.
    pub input: Vec<f64>,
    pub slots: Vec<Option<TaskId>>,
}

fn norm(v: f64, scale: f64) -> f64 {
    if v.is_finite() {
        (v / scale).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Encode up to `n_per_type` jobs per band, earliest deadline first.
/// Features per slot: estimated duration, preemptive flag, distance.
/// Empty slots stay zero.
pub fn dqn_encode(jobs: &[Task], n_per_type: usize, scale: EncodeScale) -> Encoded {
    assert!(n_per_type >= 1, "need at least one slot per type");
    let mut input = vec![0.0; DQN_BANDS.len() * n_per_type * DQN_FEATURES];
    let mut slots = vec![None; DQN_BANDS.len() * n_per_type];
    for (b, kind) in DQN_BANDS.iter().enumerate() {
        let mut band: Vec<&Task> = jobs.iter().filter(|t| t.kind == *kind).collect();
        band.sort_by(|x, y| x.deadline.total_cmp(&y.deadline).then(x.id.cmp(&y.id)));
        for (i, t) in band.into_iter().take(n_per_type).enumerate() {
            let slot = b * n_per_type + i;
            let base = slot * DQN_FEATURES;
            // occupied slots never read as all zeros
            input[base] = norm(t.estimated_duration, scale.duration).max(1e-3);
            input[base + 1] = if t.preemptive { 1.0 } else { 0.0 };
            input[base + 2] = norm(t.distance_from_robot, scale.distance);
            slots[slot] = Some(t.id);
        }
    }
    Encoded { input, slots }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Q-network agent. In training mode it learns from the reward carried by
/// `last_eval` inside `select_task`.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub learner: Learner,
    pub n_per_type: usize,
    pub scale: EncodeScale,
    pub training: bool,
    stream: Stream,
    prev: Option<(Vec<f64>, usize)>,
    pub last_loss: Option<f64>,
}

impl DqnAgent {
    pub fn new(
        net: Mlp,
        hyper: DqnHyper,
        n_per_type: usize,
        scale: EncodeScale,
        seed: u64,
    ) -> Result<Self, DqnError> {
        let slots = DQN_BANDS.len() * n_per_type;
        if net.input_size() != slots * DQN_FEATURES || net.output_size() != slots {
            return Err(DqnError::DimensionMismatch {
                expected: slots * DQN_FEATURES,
                got: net.input_size(),
            });
        }
        let stream = Stream::new(seed);
        let learner = Learner::new(net, hyper, stream.fork("learner"));
        Ok(Self {
            learner,
            n_per_type,
            scale,
            training: false,
            stream,
            prev: None,
            last_loss: None,
        })
    }

    pub fn input_size(n_per_type: usize) -> usize {
        DQN_BANDS.len() * n_per_type * DQN_FEATURES
    }

    pub fn output_size(n_per_type: usize) -> usize {
        DQN_BANDS.len() * n_per_type
    }

    pub fn net(&self) -> &Mlp {
        &self.learner.online
    }

    fn remember(&mut self, next: Vec<f64>, reward: f64, terminal: bool) {
        if let Some((state, action)) = self.prev.take() {
            self.learner.push(Transition {
                state,
                action,
                reward,
                next_state: next,
                terminal,
            });
            match self.learner.learn() {
                Ok(loss) => self.last_loss = loss.or(self.last_loss),
                Err(e) => panic!("training diverged: {e}"),
            }
        }
    }
}

impl DecisionAgent for DqnAgent {
    fn name(&self) -> &str {
        "dqn"
    }

    fn select_task(&mut self, jobs: &[Task], _now: f64, last_eval: &EvalResult) -> AgentDecision {
        let enc = dqn_encode(jobs, self.n_per_type, self.scale);
        if self.training {
            self.remember(enc.input.clone(), last_eval.reward().unwrap_or(0.0), false);
        }
        let n = enc.slots.len();
        let action = if self.training && self.stream.chance(self.learner.epsilon()) {
            self.stream.index(n)
        } else {
            let q = self.learner.online.forward(&enc.input).expect("encoder matches network");
            argmax(&q)
        };
        if self.training {
            self.prev = Some((enc.input, action));
            self.learner.tick();
        }
        AgentDecision {
            selected: enc.slots[action].map_or(Choice::Nonexistent, Choice::Job),
            considered: enc.slots.iter().flatten().copied().collect(),
        }
    }

    fn end_episode(&mut self, last_eval: &EvalResult) {
        if self.training {
            let zeros = vec![0.0; self.learner.online.input_size()];
            self.remember(zeros, last_eval.reward().unwrap_or(0.0), true);
        }
        self.prev = None;
    }
}

#[derive(Debug, Error)]
pub enum AgentSpecError {
    #[error("hesitance must lie in [0, 1], got {0}")]
    Hesitance(f64),
    #[error("ratio must be non-negative, got {0}")]
    Ratio(f64),
    #[error("cannot load network {path}: {source}")]
    Network {
        path: PathBuf,
        #[source]
        source: DqnError,
    },
    #[error(transparent)]
    Dqn(#[from] DqnError),
}

/// Agent description as found in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "agent", rename_all = "snake_case")]
pub enum AgentSpec {
    SimpleLongest {
        #[serde(default)]
        hesitance: f64,
    },
    SimpleShortest {
        #[serde(default)]
        hesitance: f64,
    },
    Distance {
        ratio: f64,
    },
    Scheduler,
    Dqn {
        network: PathBuf,
        #[serde(default = "default_n_per_type")]
        n_per_type: usize,
    },
    Idle,
}

fn default_n_per_type() -> usize {
    4
}

impl AgentSpec {
    pub fn label(&self) -> String {
        match self {
            AgentSpec::SimpleLongest { hesitance } => format!("simple-longest(h={hesitance})"),
            AgentSpec::SimpleShortest { hesitance } => format!("simple-shortest(h={hesitance})"),
            AgentSpec::Distance { ratio } => format!("distance(r={ratio})"),
            AgentSpec::Scheduler => "scheduler".into(),
            AgentSpec::Dqn { network, .. } => match network.file_stem() {
                Some(stem) => format!("dqn({})", stem.to_string_lossy()),
                None => "dqn".into(),
            },
            AgentSpec::Idle => "idle".into(),
        }
    }

    pub fn validate(&self) -> Result<(), AgentSpecError> {
        match *self {
            AgentSpec::SimpleLongest { hesitance } | AgentSpec::SimpleShortest { hesitance }
                if !(0.0..=1.0).contains(&hesitance) =>
            {
                Err(AgentSpecError::Hesitance(hesitance))
            }
            AgentSpec::Distance { ratio } if !(ratio >= 0.0 && ratio.is_finite()) => {
                Err(AgentSpecError::Ratio(ratio))
            }
            _ => Ok(()),
        }
    }

    /// Instantiate the agent. `seed` feeds any randomness it uses;
    /// `diagonal` scales distance features for the DQN agent.
    pub fn build(&self, seed: u64, diagonal: f64) -> Result<Box<dyn DecisionAgent + Send>, AgentSpecError> {
        self.validate()?;
        Ok(match self {
            AgentSpec::SimpleLongest { hesitance } => {
                Box::new(SimpleAgent::new(SimpleMode::Longest, *hesitance, seed))
            }
            AgentSpec::SimpleShortest { hesitance } => {
                Box::new(SimpleAgent::new(SimpleMode::Shortest, *hesitance, seed))
            }
            AgentSpec::Distance { ratio } => Box::new(DistanceAgent::new(*ratio)),
            AgentSpec::Scheduler => Box::new(SchedulerAgent::new()),
            AgentSpec::Dqn { network, n_per_type } => {
                let net = Mlp::load_file(network).map_err(|source| AgentSpecError::Network {
                    path: network.clone(),
                    source,
                })?;
                Box::new(DqnAgent::new(
                    net,
                    DqnHyper::default(),
                    *n_per_type,
                    EncodeScale::for_diagonal(diagonal),
                    seed,
                )?)
            }
            AgentSpec::Idle => Box::new(IdleAgent),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point;

    fn job(id: u32, est: f64) -> Task {
        let mut t = Task::patrol(TaskId(id), vec![Point::new(1.0, 1.0)], 5).with_times(0.0, 100.0);
        t.estimated_duration = est;
        t
    }

    #[test]
    fn longest_and_shortest() {
        let jobs = [job(0, 10.0), job(1, 30.0)];
        assert_eq!(simple_pick(&jobs, SimpleMode::Longest), Some(TaskId(1)));
        assert_eq!(simple_pick(&jobs, SimpleMode::Shortest), Some(TaskId(0)));
        assert_eq!(simple_pick(&[], SimpleMode::Shortest), None);
    }

    #[test]
    fn full_hesitance_repeats_previous() {
        let jobs = [job(0, 10.0), job(1, 30.0)];
        let mut s = Stream::new(1);
        let d = simple_select(&jobs, SimpleMode::Longest, 1.0, &mut s, Some(TaskId(0)));
        assert_eq!(d.selected, Choice::Job(TaskId(0)));
    }

    #[test]
    fn hesitance_ignores_vanished_previous() {
        let jobs = [job(0, 10.0)];
        let mut s = Stream::new(1);
        let d = simple_select(&jobs, SimpleMode::Longest, 1.0, &mut s, Some(TaskId(9)));
        assert_eq!(d.selected, Choice::Job(TaskId(0)));
    }

    #[test]
    fn distance_ratio_zero_picks_farthest() {
        let mut a = job(0, 20.0);
        a.distance_from_robot = 10.0;
        let mut b = job(1, 0.0);
        b.distance_from_robot = 9.0;
        assert_eq!(distance_select(&[a.clone(), b.clone()], 0.0).selected, Choice::Job(TaskId(0)));
        assert_eq!(distance_select(&[a, b], 0.5).selected, Choice::Job(TaskId(1)));
    }

    #[test]
    fn distance_tie_goes_to_lowest_id() {
        let mut a = job(3, 10.0);
        a.distance_from_robot = 5.0;
        let mut b = job(1, 10.0);
        b.distance_from_robot = 5.0;
        assert_eq!(distance_select(&[a, b], 0.5).selected, Choice::Job(TaskId(1)));
    }

    #[test]
    fn single_job_table() {
        let t = job(0, 30.0);
        let table = request_table(&[t], 0.0);
        assert_eq!(
            table.scheduled,
            vec![Slot {
                id: TaskId(0),
                start: 70.0,
                end: 100.0
            }]
        );
        assert!(table.rejected.is_empty());
    }

    #[test]
    fn higher_priority_wins_collision() {
        let mut hi = job(0, 30.0);
        hi.priority = 10;
        let mut lo = job(1, 30.0);
        lo.priority = 5;
        let table = request_table(&[lo, hi], 0.0);
        assert_eq!(table.scheduled[0].id, TaskId(0));
        assert_eq!(table.rejected, vec![TaskId(1)]);
    }

    #[test]
    fn scheduler_follows_table() {
        let jobs = [job(0, 30.0)];
        let table = request_table(&jobs, 0.0);
        assert_eq!(scheduler_select(&jobs, 80.0, &table).selected, Choice::Job(TaskId(0)));
        assert_eq!(scheduler_select(&jobs, 50.0, &table).selected, Choice::Idle);
    }

    #[test]
    fn empty_encoding_is_zero() {
        let e = dqn_encode(&[], 4, EncodeScale::for_diagonal(10.0));
        assert_eq!(e.input.len(), 36);
        assert!(e.input.iter().all(|v| *v == 0.0));
        assert!(e.slots.iter().all(Option::is_none));
    }

    #[test]
    fn one_fall_fills_one_slot() {
        let mut f = Task::fall(TaskId(0), Point::new(1.0, 1.0), 60.0, 900.0).with_times(0.0, 50.0);
        f.estimated_duration = 60.0;
        f.distance_from_robot = 2.0;
        let e = dqn_encode(&[f], 4, EncodeScale::for_diagonal(10.0));
        assert_eq!(e.slots.iter().flatten().count(), 1);
        assert_eq!(e.slots[0], Some(TaskId(0)));
        assert!(e.input[..3].iter().any(|v| *v != 0.0));
        assert!(e.input[3..].iter().all(|v| *v == 0.0));
    }
}
