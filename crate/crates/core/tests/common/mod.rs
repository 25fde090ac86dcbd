//! Independent reference implementations shared by the integration tests.
//! Each oracle works from the definition of the behavior it checks, not from
//! the library's algorithms.

#![allow(dead_code)]

pub mod criteria;

use std::collections::VecDeque;
use std::sync::Arc;

use tabsa::agents::{Choice, Slot};
use tabsa::dqn::{td_loss, Mlp, Transition};
use tabsa::eval::RewardParams;
use tabsa::geom::{Cell, CellRect, Point};
use tabsa::worldgen::{CellKind, EnvironmentMap, Room, SpawnDistribution, SpawnWeights};
use tabsa::Stream;

/// Map whose cells are `Free` unless `blocked`.
pub fn grid_map(cols: usize, rows: usize, blocked: &[bool], res: f64) -> Arc<EnvironmentMap> {
    let static_grid = blocked
        .iter()
        .map(|b| if *b { CellKind::Wall } else { CellKind::Free })
        .collect();
    Arc::new(EnvironmentMap {
        width_m: cols as f64 * res,
        height_m: rows as f64 * res,
        resolution: res,
        cols,
        rows,
        static_grid,
        rooms: vec![Room {
            id: 0,
            rect: CellRect {
                x0: 0,
                y0: 0,
                x1: cols - 1,
                y1: rows - 1,
            },
        }],
        doors: vec![],
        furniture: vec![],
        objects: vec![],
        door_clearance_cells: 0,
        spawn_weights: SpawnWeights::default(),
        spawn_prob: SpawnDistribution::default(),
    })
}

pub fn cell_center(c: Cell, res: f64) -> Point {
    Point::new((c.x as f64 + 0.5) * res, (c.y as f64 + 0.5) * res)
}

/// Quadratic-time Dijkstra over an 8-connected grid where a diagonal step
/// needs both orthogonal neighbours open. Returns grid steps, or infinity.
pub fn dijkstra_oracle(cols: usize, rows: usize, blocked: &[bool], start: Cell, goal: Cell) -> f64 {
    let n = cols * rows;
    let at = |x: usize, y: usize| y * cols + x;
    let s = at(start.x, start.y);
    let g = at(goal.x, goal.y);
    if blocked[s] || blocked[g] {
        return f64::INFINITY;
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[s] = 0.0;
    loop {
        let mut best = None;
        for i in 0..n {
            if !done[i] && dist[i].is_finite() && best.is_none_or(|b: usize| dist[i] < dist[b]) {
                best = Some(i);
            }
        }
        let Some(u) = best else { break };
        if u == g {
            break;
        }
        done[u] = true;
        let (ux, uy) = ((u % cols) as i64, (u / cols) as i64);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (vx, vy) = (ux + dx, uy + dy);
                if vx < 0 || vy < 0 || vx >= cols as i64 || vy >= rows as i64 {
                    continue;
                }
                let v = at(vx as usize, vy as usize);
                if blocked[v] {
                    continue;
                }
                let step = if dx != 0 && dy != 0 {
                    if blocked[at(vx as usize, uy as usize)] || blocked[at(ux as usize, vy as usize)] {
                        continue;
                    }
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                };
                if dist[u] + step < dist[v] {
                    dist[v] = dist[u] + step;
                }
            }
        }
    }
    dist[g]
}

/// Random grid with roughly `density` of its cells blocked.
pub fn random_grid(stream: &mut Stream, cols: usize, rows: usize, density: f64) -> Vec<bool> {
    (0..cols * rows).map(|_| stream.chance(density)).collect()
}

/// Every free cell reachable from the first one by 4-neighbour steps.
pub fn free_space_connected(map: &EnvironmentMap) -> bool {
    let free: Vec<bool> = map.static_grid.iter().map(|k| *k == CellKind::Free).collect();
    let Some(first) = free.iter().position(|f| *f) else {
        return true;
    };
    let mut seen = vec![false; free.len()];
    let mut queue = VecDeque::from([first]);
    seen[first] = true;
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % map.cols, i / map.cols);
        let mut visit = |j: usize| {
            if free[j] && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < map.cols {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - map.cols);
        }
        if y + 1 < map.rows {
            visit(i + map.cols);
        }
    }
    free.iter().zip(&seen).all(|(f, s)| !f || *s)
}

/// No furniture cell within `door_clearance_cells` (Chebyshev) of a door cell.
pub fn doors_clear(map: &EnvironmentMap) -> bool {
    let furniture: Vec<Cell> = (0..map.static_grid.len())
        .filter(|i| map.static_grid[*i] == CellKind::Furniture)
        .map(|i| Cell::new(i % map.cols, i / map.cols))
        .collect();
    map.doors.iter().flat_map(|d| &d.cells).all(|d| {
        furniture
            .iter()
            .all(|f| d.x.abs_diff(f.x).max(d.y.abs_diff(f.y)) > map.door_clearance_cells)
    })
}

/// Every object sits on a furniture cell of the piece it names.
pub fn objects_on_furniture(map: &EnvironmentMap) -> bool {
    map.objects.iter().all(|o| {
        let idx = o.cell.y * map.cols + o.cell.x;
        let piece = map.furniture.iter().find(|f| f.id == o.furniture);
        map.static_grid[idx] == CellKind::Furniture
            && piece.is_some_and(|p| {
                p.rect.x0 <= o.cell.x && o.cell.x <= p.rect.x1 && p.rect.y0 <= o.cell.y && o.cell.y <= p.rect.y1
            })
    })
}

/// Minimal job description for the schedule oracle.
#[derive(Debug, Clone, Copy)]
pub struct JobSpec {
    pub id: u32,
    pub priority: u32,
    pub request_time: f64,
    pub deadline: f64,
    pub estimate: f64,
}

/// Greedy schedule by repeated selection of the best remaining job.
/// Returns `(scheduled slots, rejected ids)` in visiting order.
pub fn greedy_schedule_oracle(jobs: &[JobSpec]) -> (Vec<(u32, f64, f64)>, Vec<u32>) {
    let mut left: Vec<JobSpec> = jobs.to_vec();
    let mut scheduled: Vec<(u32, f64, f64)> = Vec::new();
    let mut rejected = Vec::new();
    while !left.is_empty() {
        let mut best = 0;
        for i in 1..left.len() {
            let (a, b) = (&left[i], &left[best]);
            let ahead = a.priority > b.priority
                || (a.priority == b.priority && a.request_time < b.request_time)
                || (a.priority == b.priority && a.request_time == b.request_time && a.id < b.id);
            if ahead {
                best = i;
            }
        }
        let j = left.remove(best);
        if !j.estimate.is_finite() {
            rejected.push(j.id);
            continue;
        }
        let (s, e) = (j.deadline - j.estimate, j.deadline);
        let clash = scheduled.iter().any(|&(_, s2, e2)| !(e < s2 || e2 < s));
        if clash {
            rejected.push(j.id);
        } else {
            scheduled.push((j.id, s, e));
        }
    }
    (scheduled, rejected)
}

pub fn pairwise_disjoint(slots: &[Slot]) -> bool {
    for (i, a) in slots.iter().enumerate() {
        for b in &slots[i + 1..] {
            if !(a.end < b.start || b.end < a.start) {
                return false;
            }
        }
    }
    true
}

/// The facts the reward ladder depends on, stated directly.
#[derive(Debug, Clone, Copy)]
pub struct LadderState {
    pub all_complete: bool,
    pub any_dead: bool,
    pub just_completed: bool,
    pub no_jobs: bool,
    pub decision_is_job: bool,
    pub decision_changed: bool,
}

/// Reward ladder as a lookup over the first true condition.
pub fn reward_oracle(s: LadderState, p: &RewardParams) -> (f64, bool) {
    let change = if s.decision_changed { p.penalty_change_job } else { 0.0 };
    let ladder: [(bool, f64, bool); 5] = [
        (s.all_complete, p.reward_all_complete, true),
        (s.any_dead, p.penalty_dead_job, true),
        (s.just_completed, p.reward_job_complete, false),
        (s.no_jobs, 0.0, false),
        (s.decision_is_job, p.reward_real_job + change, false),
    ];
    for (hit, reward, stop) in ladder {
        if hit {
            return (reward, stop);
        }
    }
    (p.penalty_nonexistent_job + change, false)
}

pub fn choice_differs(a: Option<Choice>, b: Choice) -> bool {
    a.is_some_and(|a| a != b)
}

/// Largest per-parameter disagreement between the analytic gradient and
/// central differences of the loss, relative to the gradient magnitude.
pub fn gradient_check(net: &Mlp, batch: &[&Transition], targets: &[f64], analytic: &[f64], h: f64) -> f64 {
    let base = net.params();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_params(&p);
        let up = td_loss(&probe, batch, targets);
        p[i] = base[i] - h;
        probe.set_params(&p);
        let down = td_loss(&probe, batch, targets);
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// Dense forward pass by explicit matrix products, rectifier on hidden layers.
pub fn forward_oracle(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let sizes = net.sizes();
    let mut a = x.to_vec();
    for l in 0..sizes.len() - 1 {
        let (nin, nout) = (sizes[l], sizes[l + 1]);
        let w = net.weights(l);
        let b = net.biases(l);
        let mut z = vec![0.0; nout];
        for (o, zo) in z.iter_mut().enumerate() {
            let mut acc = b[o];
            for i in 0..nin {
                acc += w[o * nin + i] * a[i];
            }
            *zo = if l + 2 < sizes.len() { acc.max(0.0) } else { acc };
        }
        a = z;
    }
    a
}
