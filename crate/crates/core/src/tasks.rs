//! Task model, execution and seeded generation.
//!
//! A task is a unit of robot work with a request time, a deadline and an
//! optional maximum delay after which it dies (`deathtime = deadline +
//! max_delay`). Concrete behavior lives in [`TaskEffect`]:
//!
//! - `Dwell`: go to a pose and stay there (Fall, Pick, Place);
//! - `Route`: visit waypoints in order (Patrol);
//! - `Sequence`: run subtasks one after another (Pick And Place).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::determinism::Stream;
use crate::engine::RobotState;
use crate::geom::Point;
use crate::navgrid::OccupancyView;
use crate::worldgen::EnvironmentMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    Fall,
    Patrol,
    Pick,
    Place,
    PickAndPlace,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Fall,
        TaskKind::Patrol,
        TaskKind::Pick,
        TaskKind::Place,
        TaskKind::PickAndPlace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Fall => "Fall",
            TaskKind::Patrol => "Patrol",
            TaskKind::Pick => "Pick",
            TaskKind::Place => "Place",
            TaskKind::PickAndPlace => "PickAndPlace",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectRef {
    pub object_id: usize,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TaskEffect {
    /// Reach `target`, then stay for `remaining` seconds.
    Dwell {
        target: Point,
        remaining: f64,
        object: Option<ObjectRef>,
    },
    /// Visit `waypoints[next..]` in order.
    Route { waypoints: Vec<Point>, next: usize },
    /// Work on `subtasks[active..]` in order.
    Sequence { active: usize },
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum WorkError {
    #[error("target unreachable this step")]
    TargetUnreachable,
}

#[derive(Debug, Error, PartialEq)]
pub enum TaskGenError {
    #[error("invalid task generation parameters: {0}")]
    InvalidParams(String),
    #[error("task generation failed: {0}")]
    GenerationFailed(String),
}

/// Non-finite values serialize as `null`.
mod maybe_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub kind: TaskKind,
    pub request_time: f64,
    pub deadline: f64,
    /// `None` means the task cannot die.
    pub max_delay: Option<f64>,
    pub deathtime: Option<f64>,
    pub priority: u32,
    pub preemptive: bool,
    pub effect: TaskEffect,
    #[serde(with = "maybe_inf")]
    pub estimated_duration: f64,
    #[serde(with = "maybe_inf")]
    pub distance_from_robot: f64,
    /// Some dwell, route or subtask progress has been made; travel alone does not count.
    pub started: bool,
    pub completed_at: Option<f64>,
    pub subtasks: Vec<Task>,
}

const AT_TARGET_EPS: f64 = 1e-9;
const TIME_EPS: f64 = 1e-9;

impl Task {
    fn base(id: TaskId, kind: TaskKind, effect: TaskEffect) -> Task {
        Task {
            id,
            kind,
            request_time: 0.0,
            deadline: 0.0,
            max_delay: None,
            deathtime: None,
            priority: 0,
            preemptive: false,
            effect,
            estimated_duration: 0.0,
            distance_from_robot: 0.0,
            started: false,
            completed_at: None,
            subtasks: Vec::new(),
        }
    }

    pub fn fall(id: TaskId, target: Point, dwell: f64, max_delay: f64) -> Task {
        let mut t = Task::base(
            id,
            TaskKind::Fall,
            TaskEffect::Dwell {
                target,
                remaining: dwell,
                object: None,
            },
        );
        t.priority = FALL_PRIORITY;
        t.max_delay = Some(max_delay);
        t.recompute_deathtime();
        t
    }

    pub fn patrol(id: TaskId, waypoints: Vec<Point>, priority: u32) -> Task {
        assert!(!waypoints.is_empty(), "patrol needs at least one waypoint");
        let mut t = Task::base(id, TaskKind::Patrol, TaskEffect::Route { waypoints, next: 0 });
        t.priority = priority;
        t.preemptive = true;
        t
    }

    pub fn pick(id: TaskId, target: Point, object: ObjectRef, dwell: f64) -> Task {
        Task::base(
            id,
            TaskKind::Pick,
            TaskEffect::Dwell {
                target,
                remaining: dwell,
                object: Some(object),
            },
        )
    }

    pub fn place(id: TaskId, target: Point, object: ObjectRef, dwell: f64) -> Task {
        Task {
            kind: TaskKind::Place,
            ..Task::pick(id, target, object, dwell)
        }
    }

    /// Pick, carry along a patrol leg, place. Priority is the subtask maximum.
    pub fn pick_and_place(id: TaskId, pick: Task, carry: Task, place: Task) -> Task {
        let mut t = Task::base(id, TaskKind::PickAndPlace, TaskEffect::Sequence { active: 0 });
        t.subtasks = vec![pick, carry, place];
        t.priority = t.subtasks.iter().map(|s| s.priority).max().unwrap_or(0);
        t
    }

    pub fn with_times(mut self, request_time: f64, deadline: f64) -> Task {
        self.request_time = request_time;
        self.deadline = deadline;
        self.recompute_deathtime();
        self
    }

    pub fn recompute_deathtime(&mut self) {
        self.deathtime = self.max_delay.map(|d| self.deadline + d);
    }

    pub fn is_called(&self, now: f64) -> bool {
        now >= self.request_time
    }

    pub fn is_completed(&self) -> bool {
        match &self.effect {
            TaskEffect::Dwell { remaining, .. } => *remaining <= 0.0,
            TaskEffect::Route { waypoints, next } => *next >= waypoints.len(),
            TaskEffect::Sequence { .. } => self.subtasks.iter().all(Task::is_completed),
        }
    }

    pub fn is_alive(&self, now: f64) -> bool {
        match self.deathtime {
            None => true,
            Some(death) => !(now > death && !self.is_completed()),
        }
    }

    /// Where the robot has to go next for this task.
    pub fn current_target(&self) -> Option<Point> {
        match &self.effect {
            TaskEffect::Dwell { target, .. } => Some(*target),
            TaskEffect::Route { waypoints, next } => waypoints.get(*next).copied(),
            TaskEffect::Sequence { active } => {
                self.subtasks.get(*active).and_then(Task::current_target)
            }
        }
    }

    /// Remaining dwell of the active dwell stage, if any.
    pub fn remaining_dwell(&self) -> Option<f64> {
        match &self.effect {
            TaskEffect::Dwell { remaining, .. } => Some(*remaining),
            TaskEffect::Route { .. } => None,
            TaskEffect::Sequence { active } => {
                self.subtasks.get(*active).and_then(Task::remaining_dwell)
            }
        }
    }

    pub fn active_subtask(&self) -> Option<usize> {
        match self.effect {
            TaskEffect::Sequence { active } => Some(active),
            _ => None,
        }
    }

    /// Remaining time from `pos`, accumulating into `acc`.
    /// `leg(from, to, first)` returns path length in meters; `first` marks
    /// the leg starting at the robot.
    fn chain(
        &self,
        pos: &mut Point,
        first: &mut bool,
        velocity: f64,
        leg: &mut dyn FnMut(Point, Point, bool) -> f64,
    ) -> f64 {
        let mut travel = |from: Point, to: Point, first: &mut bool| -> f64 {
            let len = if from.dist(to) < AT_TARGET_EPS {
                0.0
            } else {
                leg(from, to, *first)
            };
            *first = false;
            len / velocity
        };
        match &self.effect {
            TaskEffect::Dwell { target, remaining, .. } => {
                if *remaining <= 0.0 {
                    return 0.0;
                }
                let t = travel(*pos, *target, first) + remaining;
                *pos = *target;
                t
            }
            TaskEffect::Route { waypoints, next } => {
                let mut t = 0.0;
                for w in &waypoints[(*next).min(waypoints.len())..] {
                    t += travel(*pos, *w, first);
                    *pos = *w;
                }
                t
            }
            TaskEffect::Sequence { active } => self.subtasks[*active..]
                .iter()
                .map(|s| s.chain(pos, first, velocity, leg))
                .sum(),
        }
    }

    /// Recompute `estimated_duration` of this task and its subtasks.
    ///
    /// Each remaining subtask is estimated from the pose where the previous
    /// one ends, plus `min_task_duration`; the parent holds the sum.
    pub fn refresh_estimate(
        &mut self,
        robot_pos: Point,
        velocity: f64,
        min_task_duration: f64,
        leg: &mut dyn FnMut(Point, Point, bool) -> f64,
    ) -> f64 {
        let mut pos = robot_pos;
        let mut first = true;
        let est = match self.effect {
            TaskEffect::Sequence { active } => {
                let mut total = 0.0;
                for (i, sub) in self.subtasks.iter_mut().enumerate() {
                    sub.estimated_duration = if i < active {
                        0.0
                    } else {
                        sub.chain(&mut pos, &mut first, velocity, leg) + min_task_duration
                    };
                    total += sub.estimated_duration;
                }
                total
            }
            _ => self.chain(&mut pos, &mut first, velocity, leg) + min_task_duration,
        };
        self.estimated_duration = est;
        est
    }

    /// Advance execution by at most `budget` seconds. Returns the time used.
    ///
    /// On `TargetUnreachable` the progress made before the stall is kept.
    pub fn work(
        &mut self,
        robot: &mut RobotState,
        view: &OccupancyView,
        budget: f64,
    ) -> Result<f64, WorkError> {
        let mut used = 0.0;
        let result = self.work_inner(robot, view, budget, &mut used);
        result.map(|_| used)
    }

    fn work_inner(
        &mut self,
        robot: &mut RobotState,
        view: &OccupancyView,
        budget: f64,
        used: &mut f64,
    ) -> Result<(), WorkError> {
        while !self.is_completed() && budget - *used > TIME_EPS {
            let left = budget - *used;
            match &mut self.effect {
                TaskEffect::Dwell { target, remaining, .. } => {
                    if robot.pose.dist(*target) > AT_TARGET_EPS {
                        let t = robot.travel(view, *target, left)?;
                        *used += t;
                        if robot.pose.dist(*target) > AT_TARGET_EPS {
                            break;
                        }
                    } else {
                        let d = remaining.min(left);
                        *remaining -= d;
                        self.started = true;
                        if *remaining < TIME_EPS {
                            *remaining = 0.0;
                        }
                        *used += d;
                    }
                }
                TaskEffect::Route { waypoints, next } => {
                    let target = waypoints[*next];
                    if robot.pose.dist(target) > AT_TARGET_EPS {
                        let t = robot.travel(view, target, left)?;
                        *used += t;
                        if robot.pose.dist(target) > AT_TARGET_EPS {
                            break;
                        }
                    }
                    *next += 1;
                    self.started = true;
                }
                TaskEffect::Sequence { active } => {
                    let i = *active;
                    let sub = &mut self.subtasks[i];
                    let t = sub.work(robot, view, left);
                    *used += *t.as_ref().unwrap_or(&0.0);
                    t?;
                    if sub.started {
                        self.started = true;
                    }
                    if sub.is_completed() {
                        if let TaskEffect::Sequence { active } = &mut self.effect {
                            *active += 1;
                        }
                    } else {
                        break;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Advance `task` by `dt` seconds of robot work.
pub fn work_for(
    task: &mut Task,
    robot: &mut RobotState,
    view: &OccupancyView,
    dt: f64,
) -> Result<f64, WorkError> {
    task.work(robot, view, dt)
}

/// Expected remaining duration of `task` if started now from the robot pose,
/// planning every leg on `view`. Infinite when any leg is unreachable.
pub fn estimate_duration(
    task: &Task,
    robot: &RobotState,
    view: &OccupancyView,
    min_task_duration: f64,
) -> f64 {
    let mut copy = task.clone();
    copy.refresh_estimate(robot.pose, robot.velocity, min_task_duration, &mut |a, b, _| {
        view.path_length(a, b)
    })
}

pub const FALL_PRIORITY: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlackRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskCounts {
    pub fall: u32,
    pub patrol: u32,
    pub pick_and_place: u32,
    pub pick: u32,
    pub place: u32,
}

impl Default for TaskCounts {
    fn default() -> Self {
        Self {
            fall: 12,
            patrol: 12,
            pick_and_place: 12,
            pick: 0,
            place: 0,
        }
    }
}

impl TaskCounts {
    pub fn uniform(n: u32) -> Self {
        Self {
            fall: n,
            patrol: n,
            pick_and_place: n,
            pick: 0,
            place: 0,
        }
    }

    pub fn total(&self) -> u32 {
        self.fall + self.patrol + self.pick_and_place + self.pick + self.place
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskGenParams {
    /// Length of the scenario window, seconds.
    pub horizon: f64,
    pub counts: TaskCounts,
    pub fall_dwell: f64,
    pub pick_dwell: f64,
    pub place_dwell: f64,
    pub fall_max_delay: f64,
    /// Inclusive range of Patrol priorities; must stay below the Fall priority.
    pub patrol_priority: (u32, u32),
    pub fall_slack: SlackRange,
    pub patrol_slack: SlackRange,
    pub pick_and_place_slack: SlackRange,
    /// Pick And Place destinations come from this many furniture pieces
    /// nearest to the source piece.
    pub nearest_furniture: usize,
}

impl Default for TaskGenParams {
    fn default() -> Self {
        Self {
            horizon: 14_400.0,
            counts: TaskCounts::default(),
            fall_dwell: 60.0,
            pick_dwell: 30.0,
            place_dwell: 30.0,
            fall_max_delay: 900.0,
            patrol_priority: (1, 9),
            fall_slack: SlackRange {
                min: 60.0,
                max: 300.0,
            },
            patrol_slack: SlackRange {
                min: 300.0,
                max: 1800.0,
            },
            pick_and_place_slack: SlackRange {
                min: 300.0,
                max: 1800.0,
            },
            nearest_furniture: 3,
        }
    }
}

impl TaskGenParams {
    pub fn validate(&self) -> Result<(), TaskGenError> {
        let bad = |m: &str| Err(TaskGenError::InvalidParams(m.to_string()));
        for v in [self.horizon, self.fall_dwell, self.pick_dwell, self.place_dwell] {
            if !(v.is_finite() && v > 0.0) {
                return bad("durations must be positive");
            }
        }
        if !(self.fall_max_delay.is_finite() && self.fall_max_delay >= 0.0) {
            return bad("fall max delay must be non-negative");
        }
        let (lo, hi) = self.patrol_priority;
        if lo > hi || hi >= FALL_PRIORITY {
            return bad("patrol priority range must be ordered and below the fall priority");
        }
        let c = &self.counts;
        let used = [
            (c.fall, self.fall_slack),
            (c.patrol, self.patrol_slack),
            (c.pick_and_place + c.pick + c.place, self.pick_and_place_slack),
        ];
        for (_, s) in used.into_iter().filter(|(n, _)| *n > 0) {
            if !(s.min >= 0.0 && s.min <= s.max && s.min < self.horizon) {
                return bad("slack range must satisfy 0 <= min <= max and min < horizon");
            }
        }
        if self.nearest_furniture == 0 {
            return bad("nearest_furniture must be at least 1");
        }
        Ok(())
    }
}

struct Generator<'a> {
    map: &'a EnvironmentMap,
    free: Vec<Point>,
    stream: Stream,
    next_id: u32,
}

impl Generator<'_> {
    fn id(&mut self) -> TaskId {
        let id = TaskId(self.next_id);
        self.next_id += 1;
        id
    }

    fn free_point(&mut self) -> Point {
        self.free[self.stream.index(self.free.len())]
    }

    fn times(&mut self, horizon: f64, slack: SlackRange) -> (f64, f64) {
        let request = self.stream.uniform(0.0, horizon - slack.min);
        let hi = slack.max.min(horizon - request);
        let deadline = request + self.stream.uniform(slack.min, hi.max(slack.min));
        (request, deadline)
    }

    fn object_ref(&self, idx: usize) -> (Point, ObjectRef) {
        let o = &self.map.objects[idx];
        let cell = self.map.approach_cell(o).expect("furniture keeps a free ring");
        (
            self.map.center(cell),
            ObjectRef {
                object_id: o.id,
                position: o.position,
            },
        )
    }

    fn destination_for(&mut self, source: usize, k: usize) -> usize {
        let map = self.map;
        let src_piece = &map.furniture[map.objects[source].furniture];
        let center = |r: &crate::geom::CellRect| {
            Point::new((r.x0 + r.x1) as f64 / 2.0, (r.y0 + r.y1) as f64 / 2.0)
        };
        let c0 = center(&src_piece.rect);
        let mut pieces: Vec<usize> = (0..map.furniture.len()).collect();
        pieces.sort_by(|a, b| {
            center(&map.furniture[*a].rect)
                .dist(c0)
                .total_cmp(&center(&map.furniture[*b].rect).dist(c0))
                .then(a.cmp(b))
        });
        let near: Vec<usize> = pieces.into_iter().take(k).collect();
        let candidates: Vec<usize> = map
            .objects
            .iter()
            .filter(|o| o.id != source && near.contains(&o.furniture))
            .map(|o| o.id)
            .collect();
        if candidates.is_empty() {
            let others: Vec<usize> = (0..map.objects.len()).filter(|&i| i != source).collect();
            others[self.stream.index(others.len())]
        } else {
            candidates[self.stream.index(candidates.len())]
        }
    }
}

/// Generate the task list for a scenario. Pure in `(params, map, seed)`.
///
/// Ids follow generation order: Falls, Patrols, Pick And Places, then
/// standalone Picks and Places.
pub fn generate_tasks(
    params: &TaskGenParams,
    map: &EnvironmentMap,
    seed: u64,
) -> Result<Vec<Task>, TaskGenError> {
    params.validate()?;
    let free: Vec<Point> = map.free_cells().map(|c| map.center(c)).collect();
    let counts = &params.counts;
    if counts.total() > 0 && free.is_empty() {
        return Err(TaskGenError::GenerationFailed("map has no free cells".into()));
    }
    let needs_objects = counts.pick_and_place > 0 || counts.pick > 0 || counts.place > 0;
    if needs_objects && map.objects.len() < 2 {
        return Err(TaskGenError::GenerationFailed(format!(
            "object tasks need at least two objects, map has {}",
            map.objects.len()
        )));
    }
    let mut g = Generator {
        map,
        free,
        stream: Stream::new(seed),
        next_id: 0,
    };
    let h = params.horizon;
    let mut tasks = Vec::with_capacity(counts.total() as usize);

    for _ in 0..counts.fall {
        let id = g.id();
        let target = g.free_point();
        let (r, d) = g.times(h, params.fall_slack);
        tasks.push(Task::fall(id, target, params.fall_dwell, params.fall_max_delay).with_times(r, d));
    }
    for _ in 0..counts.patrol {
        let id = g.id();
        let start = g.free_point();
        let end = g.free_point();
        let (lo, hi) = params.patrol_priority;
        let priority = g.stream.range_inclusive(lo as i64, hi as i64) as u32;
        let (r, d) = g.times(h, params.patrol_slack);
        tasks.push(Task::patrol(id, vec![start, end], priority).with_times(r, d));
    }
    for _ in 0..counts.pick_and_place {
        let id = g.id();
        let src = g.stream.index(map.objects.len());
        let dst = g.destination_for(src, params.nearest_furniture);
        let (pick_at, pick_obj) = g.object_ref(src);
        let (place_at, place_obj) = g.object_ref(dst);
        let (lo, hi) = params.patrol_priority;
        let carry_priority = g.stream.range_inclusive(lo as i64, hi as i64) as u32;
        let (r, d) = g.times(h, params.pick_and_place_slack);
        let pick = Task::pick(id, pick_at, pick_obj, params.pick_dwell).with_times(r, d);
        let carry = Task::patrol(id, vec![pick_at, place_at], carry_priority).with_times(r, d);
        let place = Task::place(id, place_at, place_obj, params.place_dwell).with_times(r, d);
        tasks.push(Task::pick_and_place(id, pick, carry, place).with_times(r, d));
    }
    for _ in 0..counts.pick {
        let id = g.id();
        let obj = g.stream.index(map.objects.len());
        let (at, o) = g.object_ref(obj);
        let (r, d) = g.times(h, params.pick_and_place_slack);
        tasks.push(Task::pick(id, at, o, params.pick_dwell).with_times(r, d));
    }
    for _ in 0..counts.place {
        let id = g.id();
        let obj = g.stream.index(map.objects.len());
        let (at, o) = g.object_ref(obj);
        let (r, d) = g.times(h, params.pick_and_place_slack);
        tasks.push(Task::place(id, at, o, params.place_dwell).with_times(r, d));
    }
    Ok(tasks)
}
