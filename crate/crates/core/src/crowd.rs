//! Kinematic pedestrians.
//!
//! Each pedestrian walks its planned path at constant speed and, at the end of
//! the path, applies its behavior. Pedestrians plan on the static map only
//! and ignore each other and the robot.

use serde::{Deserialize, Serialize};

use crate::determinism::Stream;
use crate::geom::Point;
use crate::navgrid::{OccupancyView, PlannedPath};
use crate::worldgen::{sample_spawn, SpawnDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Behavior {
    /// Walk back and forth between two points.
    CircleBetween { a: Point, b: Point },
    NewGoal,
    TeleportNewGoal,
    Disappear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BehaviorKind {
    CircleBetween,
    NewGoal,
    TeleportNewGoal,
    Disappear,
}

impl Behavior {
    pub fn kind(&self) -> BehaviorKind {
        match self {
            Behavior::CircleBetween { .. } => BehaviorKind::CircleBetween,
            Behavior::NewGoal => BehaviorKind::NewGoal,
            Behavior::TeleportNewGoal => BehaviorKind::TeleportNewGoal,
            Behavior::Disappear => BehaviorKind::Disappear,
        }
    }
}

/// Relative weights of the four behaviors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorMix {
    pub circle_between: f64,
    pub new_goal: f64,
    pub teleport_new_goal: f64,
    pub disappear: f64,
}

impl Default for BehaviorMix {
    fn default() -> Self {
        Self {
            circle_between: 0.4,
            new_goal: 0.3,
            teleport_new_goal: 0.2,
            disappear: 0.1,
        }
    }
}

impl BehaviorMix {
    pub fn only(kind: BehaviorKind) -> Self {
        let mut m = Self {
            circle_between: 0.0,
            new_goal: 0.0,
            teleport_new_goal: 0.0,
            disappear: 0.0,
        };
        match kind {
            BehaviorKind::CircleBetween => m.circle_between = 1.0,
            BehaviorKind::NewGoal => m.new_goal = 1.0,
            BehaviorKind::TeleportNewGoal => m.teleport_new_goal = 1.0,
            BehaviorKind::Disappear => m.disappear = 1.0,
        }
        m
    }

    fn draw(&self, stream: &mut Stream) -> BehaviorKind {
        let w = [
            self.circle_between,
            self.new_goal,
            self.teleport_new_goal,
            self.disappear,
        ];
        match stream.weighted(&w) {
            Some(0) | None => BehaviorKind::CircleBetween,
            Some(1) => BehaviorKind::NewGoal,
            Some(2) => BehaviorKind::TeleportNewGoal,
            _ => BehaviorKind::Disappear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrowdParams {
    pub count: usize,
    /// Walking speed, m/s.
    pub speed: f64,
    /// Footprint disc radius, m.
    pub radius: f64,
    pub mix: BehaviorMix,
    /// Put disappeared pedestrians back at a fresh spawn cell.
    pub respawn: bool,
    /// Goal resamples before a pedestrian with no path disappears.
    pub replan_retries: u32,
}

impl Default for CrowdParams {
    fn default() -> Self {
        Self {
            count: 4,
            speed: 1.0,
            radius: 0.2,
            mix: BehaviorMix::default(),
            respawn: false,
            replan_retries: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianState {
    pub id: usize,
    pub position: Point,
    pub speed: f64,
    pub radius: f64,
    pub behavior: Behavior,
    pub goal: Point,
    pub current_path: PlannedPath,
    /// Index of the next waypoint to reach.
    pub next_waypoint: usize,
    pub active: bool,
    respawn: bool,
    retries: u32,
    stream: Stream,
}

fn spawn_point(dist: &SpawnDistribution, view: &OccupancyView, stream: &mut Stream) -> Point {
    let map = view.map();
    map.center(map.cell_at(sample_spawn(dist, stream)))
}

/// Spawn `params.count` pedestrians from `dist`. Each pedestrian gets its own
/// sub-stream, so trajectories do not depend on stepping order.
pub fn spawn_pedestrians(
    params: &CrowdParams,
    dist: &SpawnDistribution,
    view: &OccupancyView,
    stream: &Stream,
) -> Vec<PedestrianState> {
    let statics = view.static_only();
    (0..params.count)
        .map(|id| {
            let mut s = stream.fork(&format!("pedestrian-{id}"));
            let position = spawn_point(dist, view, &mut s);
            let goal = spawn_point(dist, view, &mut s);
            let behavior = match params.mix.draw(&mut s) {
                BehaviorKind::CircleBetween => Behavior::CircleBetween {
                    a: position,
                    b: goal,
                },
                BehaviorKind::NewGoal => Behavior::NewGoal,
                BehaviorKind::TeleportNewGoal => Behavior::TeleportNewGoal,
                BehaviorKind::Disappear => Behavior::Disappear,
            };
            let current_path = statics.plan_path(position, goal).unwrap_or(PlannedPath {
                waypoints: vec![position],
                length: 0.0,
            });
            PedestrianState {
                id,
                position,
                speed: params.speed,
                radius: params.radius,
                behavior,
                goal,
                current_path,
                next_waypoint: 1,
                active: true,
                respawn: params.respawn,
                retries: params.replan_retries,
                stream: s,
            }
        })
        .collect()
}

impl PedestrianState {
    fn path_done(&self) -> bool {
        self.next_waypoint >= self.current_path.waypoints.len()
    }

    fn plan_to(&mut self, goal: Point, statics: &OccupancyView, dist: &SpawnDistribution) {
        let mut goal = goal;
        for attempt in 0..=self.retries {
            if let Ok(path) = statics.plan_path(self.position, goal) {
                self.goal = goal;
                self.current_path = path;
                self.next_waypoint = 1;
                return;
            }
            if attempt < self.retries {
                goal = spawn_point(dist, statics, &mut self.stream);
            }
        }
        self.active = false;
    }

    fn resolve_path_end(&mut self, statics: &OccupancyView, dist: &SpawnDistribution) {
        match self.behavior {
            Behavior::CircleBetween { a, b } => {
                let next = if self.goal == b { a } else { b };
                self.plan_to(next, statics, dist);
            }
            Behavior::NewGoal => {
                let goal = spawn_point(dist, statics, &mut self.stream);
                self.plan_to(goal, statics, dist);
            }
            Behavior::TeleportNewGoal => self.teleport(statics, dist),
            Behavior::Disappear => {
                if self.respawn {
                    self.teleport(statics, dist);
                } else {
                    self.active = false;
                }
            }
        }
    }

    fn teleport(&mut self, statics: &OccupancyView, dist: &SpawnDistribution) {
        self.position = spawn_point(dist, statics, &mut self.stream);
        let goal = spawn_point(dist, statics, &mut self.stream);
        self.plan_to(goal, statics, dist);
    }

    /// Advance by `dt` seconds along the current path, clamped at its end;
    /// on reaching the end, apply the behavior.
    pub fn step(&mut self, statics: &OccupancyView, dist: &SpawnDistribution, dt: f64) {
        if !self.active {
            return;
        }
        let mut budget = self.speed * dt;
        while budget > 0.0 && !self.path_done() {
            let target = self.current_path.waypoints[self.next_waypoint];
            let d = self.position.dist(target);
            if d <= budget {
                self.position = target;
                budget -= d;
                self.next_waypoint += 1;
            } else {
                self.position = self.position.toward(target, budget);
                budget = 0.0;
            }
        }
        if self.path_done() {
            self.resolve_path_end(statics, dist);
        }
    }
}

/// Functional form of [`PedestrianState::step`].
pub fn step_pedestrian(
    p: &PedestrianState,
    statics: &OccupancyView,
    dist: &SpawnDistribution,
    dt: f64,
) -> PedestrianState {
    let mut next = p.clone();
    next.step(statics, dist, dt);
    next
}

/// One row of an exported pedestrian trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedestrianSample {
    pub t: f64,
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub active: bool,
}

pub fn write_trace_csv<W: std::io::Write>(rows: &[PedestrianSample], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
