//! Occupancy view and grid path planning.
//!
//! Planning runs A* over the 8-connected grid with Euclidean edge costs and
//! the octile heuristic. Diagonal moves may not cut blocked corners. Ties are
//! broken on `(f, h, cell index)` so every query has exactly one answer.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use thiserror::Error;

use crate::crowd::PedestrianState;
use crate::geom::{Cell, Point};
use crate::worldgen::{CellKind, EnvironmentMap};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum NavError {
    #[error("no path to goal")]
    NoPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    /// Cell centers from the start cell to the goal cell.
    pub waypoints: Vec<Point>,
    pub length: f64,
}

/// Static map plus a per-step layer of pedestrian blockages.
#[derive(Debug, Clone)]
pub struct OccupancyView {
    map: Arc<EnvironmentMap>,
    dynamic: Vec<bool>,
}

const DIAG: f64 = std::f64::consts::SQRT_2;

const NEIGHBORS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

impl OccupancyView {
    pub fn new(map: Arc<EnvironmentMap>) -> Self {
        let n = map.static_grid.len();
        Self {
            map,
            dynamic: vec![false; n],
        }
    }

    pub fn map(&self) -> &EnvironmentMap {
        &self.map
    }

    pub fn map_arc(&self) -> &Arc<EnvironmentMap> {
        &self.map
    }

    pub fn dynamic_layer(&self) -> &[bool] {
        &self.dynamic
    }

    pub fn blocked_count(&self) -> usize {
        self.dynamic.iter().filter(|b| **b).count()
    }

    /// Same static map, empty dynamic layer.
    pub fn static_only(&self) -> OccupancyView {
        OccupancyView::new(self.map.clone())
    }

    #[inline]
    pub fn traversable_idx(&self, i: usize) -> bool {
        self.map.static_grid[i] == CellKind::Free && !self.dynamic[i]
    }

    pub fn traversable(&self, c: Cell) -> bool {
        self.traversable_idx(self.map.index(c))
    }

    pub fn is_dynamic_blocked(&self, c: Cell) -> bool {
        self.dynamic[self.map.index(c)]
    }

    pub fn clear_dynamic(&mut self) {
        self.dynamic.iter_mut().for_each(|b| *b = false);
    }

    /// Replace the dynamic layer with the given discs `(center, radius)`.
    pub fn embed_discs(&mut self, discs: impl IntoIterator<Item = (Point, f64)>) {
        self.clear_dynamic();
        let res = self.map.resolution;
        let (cols, rows) = (self.map.cols, self.map.rows);
        for (p, r) in discs {
            if r <= 0.0 {
                continue;
            }
            let x0 = ((p.x - r) / res).floor().max(0.0) as usize;
            let y0 = ((p.y - r) / res).floor().max(0.0) as usize;
            let x1 = (((p.x + r) / res).floor().max(0.0) as usize).min(cols - 1);
            let y1 = (((p.y + r) / res).floor().max(0.0) as usize).min(rows - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    if disc_overlaps_cell(p, r, x, y, res) {
                        self.dynamic[y * cols + x] = true;
                    }
                }
            }
        }
    }

    /// Block every cell overlapped by an active pedestrian footprint grown
    /// by `inflation` meters.
    pub fn embed_pedestrians(&mut self, pedestrians: &[PedestrianState], inflation: f64) {
        self.embed_discs(
            pedestrians
                .iter()
                .filter(|p| p.active)
                .map(|p| (p.position, p.radius + inflation)),
        );
    }

    fn neighbors(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        let cols = self.map.cols as isize;
        let rows = self.map.rows as isize;
        let (x, y) = ((i as isize) % cols, (i as isize) / cols);
        for (dx, dy) in NEIGHBORS {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= cols || ny >= rows {
                continue;
            }
            let j = (ny * cols + nx) as usize;
            if !self.traversable_idx(j) {
                continue;
            }
            if dx != 0 && dy != 0 {
                let a = (y * cols + nx) as usize;
                let b = (ny * cols + x) as usize;
                if !(self.traversable_idx(a) && self.traversable_idx(b)) {
                    continue;
                }
                f(j, DIAG);
            } else {
                f(j, 1.0);
            }
        }
    }

    fn octile(&self, i: usize, goal: usize) -> f64 {
        let cols = self.map.cols;
        let dx = (i % cols).abs_diff(goal % cols) as f64;
        let dy = (i / cols).abs_diff(goal / cols) as f64;
        let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
        (hi - lo) + lo * DIAG
    }

    /// Shortest 8-connected path between the cells containing `start` and
    /// `goal`. The start cell only needs to be statically free; the goal cell
    /// must be traversable in this view.
    pub fn plan_path(&self, start: Point, goal: Point) -> Result<PlannedPath, NavError> {
        let map = &self.map;
        if !map.in_bounds(start) || !map.in_bounds(goal) {
            return Err(NavError::NoPath);
        }
        let s = map.index(map.cell_of(start));
        let g = map.index(map.cell_of(goal));
        if map.static_grid[s] != CellKind::Free {
            return Err(NavError::NoPath);
        }
        if s == g {
            return Ok(PlannedPath {
                waypoints: vec![map.center(map.cell_at(s))],
                length: 0.0,
            });
        }
        if !self.traversable_idx(g) {
            return Err(NavError::NoPath);
        }

        let n = map.static_grid.len();
        let mut best = vec![f64::INFINITY; n];
        let mut parent = vec![u32::MAX; n];
        let mut heap = BinaryHeap::new();
        best[s] = 0.0;
        let h0 = self.octile(s, g);
        heap.push(Open::new(h0, h0, 0.0, s));
        while let Some(Open { g: gs, key: (_, _, idx) }) = heap.pop() {
            if gs > best[idx] {
                continue;
            }
            if idx == g {
                break;
            }
            self.neighbors(idx, |j, cost| {
                let cand = gs + cost;
                if cand < best[j] {
                    best[j] = cand;
                    parent[j] = idx as u32;
                    let h = self.octile(j, g);
                    heap.push(Open::new(cand + h, h, cand, j));
                }
            });
        }
        if !best[g].is_finite() {
            return Err(NavError::NoPath);
        }
        let mut cells = vec![g];
        let mut cur = g;
        while cur != s {
            cur = parent[cur] as usize;
            cells.push(cur);
        }
        cells.reverse();
        let waypoints: Vec<Point> = cells.iter().map(|&i| map.center(map.cell_at(i))).collect();
        let length = waypoints.windows(2).map(|w| w[0].dist(w[1])).sum();
        Ok(PlannedPath { waypoints, length })
    }

    /// Path length in meters, or infinity when there is no path.
    pub fn path_length(&self, a: Point, b: Point) -> f64 {
        self.plan_path(a, b).map_or(f64::INFINITY, |p| p.length)
    }

    /// Single-source shortest path lengths from `start`. The search is
    /// expanded lazily, only as far as the queried cells require.
    pub fn distance_field(&self, start: Point) -> DistanceField<'_> {
        let map = &self.map;
        let mut dist = vec![f64::INFINITY; map.static_grid.len()];
        let mut heap = BinaryHeap::new();
        if map.in_bounds(start) {
            let s = map.index(map.cell_of(start));
            if map.static_grid[s] == CellKind::Free {
                dist[s] = 0.0;
                heap.push(Open::new(0.0, 0.0, 0.0, s));
            }
        }
        DistanceField {
            view: self,
            dist,
            heap,
            settled_to: 0.0,
        }
    }
}

/// Full shortest path tree over the static map from one source cell.
#[derive(Debug, Clone)]
pub struct StaticField {
    source: usize,
    dist: Vec<f64>,
    parent: Vec<u32>,
}

impl StaticField {
    /// Build the tree from the cell containing `start` on `view`'s static layer.
    pub fn new(view: &OccupancyView, start: Point) -> Self {
        let statics = view.static_only();
        let map = view.map();
        let n = map.static_grid.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![u32::MAX; n];
        let mut source = usize::MAX;
        if map.in_bounds(start) {
            let s = map.index(map.cell_of(start));
            source = s;
            if map.static_grid[s] == CellKind::Free {
                dist[s] = 0.0;
                let mut heap = BinaryHeap::new();
                heap.push(Open::new(0.0, 0.0, 0.0, s));
                while let Some(Open { g: gs, key: (_, _, idx) }) = heap.pop() {
                    if gs > dist[idx] {
                        continue;
                    }
                    statics.neighbors(idx, |j, cost| {
                        let cand = gs + cost;
                        if cand < dist[j] {
                            dist[j] = cand;
                            parent[j] = idx as u32;
                            heap.push(Open::new(cand, 0.0, cand, j));
                        }
                    });
                }
            }
        }
        Self { source, dist, parent }
    }

    /// Index of the source cell.
    pub fn source(&self) -> usize {
        self.source
    }

    /// Path length to `p` in meters when the static shortest path is also
    /// open in `view`. `None` means a dynamic obstacle sits on that path.
    pub fn length_if_clear(&self, view: &OccupancyView, p: Point) -> Option<f64> {
        let map = view.map();
        if !map.in_bounds(p) {
            return Some(f64::INFINITY);
        }
        let target = map.index(map.cell_of(p));
        let d = self.dist[target];
        if !d.is_finite() {
            return Some(f64::INFINITY);
        }
        let cols = map.cols;
        let mut cur = target;
        while cur != self.source {
            let prev = self.parent[cur] as usize;
            if !view.traversable_idx(cur) {
                return None;
            }
            let (cx, cy) = (cur % cols, cur / cols);
            let (px, py) = (prev % cols, prev / cols);
            if cx != px && cy != py && !(view.traversable_idx(cy * cols + px) && view.traversable_idx(py * cols + cx)) {
                return None;
            }
            cur = prev;
        }
        Some(d * map.resolution)
    }
}

fn disc_overlaps_cell(p: Point, r: f64, x: usize, y: usize, res: f64) -> bool {
    let (cx0, cy0) = (x as f64 * res, y as f64 * res);
    let nx = p.x.clamp(cx0, cx0 + res);
    let ny = p.y.clamp(cy0, cy0 + res);
    let (dx, dy) = (p.x - nx, p.y - ny);
    dx * dx + dy * dy < r * r
}

/// Shortest path lengths from one source cell, in meters.
#[derive(Debug)]
pub struct DistanceField<'a> {
    view: &'a OccupancyView,
    /// In grid steps; multiply by resolution for meters.
    dist: Vec<f64>,
    heap: BinaryHeap<Open>,
    /// Every cell at or below this many steps holds its final value.
    settled_to: f64,
}

impl DistanceField<'_> {
    pub fn length_to(&mut self, p: Point) -> f64 {
        let map = self.view.map();
        if !map.in_bounds(p) {
            return f64::INFINITY;
        }
        let target = map.index(map.cell_of(p));
        self.settle(target);
        self.dist[target] * map.resolution
    }

    fn settle(&mut self, target: usize) {
        while self.dist[target] > self.settled_to {
            let Some(Open { g: gs, key: (_, _, idx) }) = self.heap.pop() else {
                return;
            };
            if gs > self.dist[idx] {
                continue;
            }
            self.settled_to = gs;
            let dist = &mut self.dist;
            let heap = &mut self.heap;
            self.view.neighbors(idx, |j, cost| {
                let cand = gs + cost;
                if cand < dist[j] {
                    dist[j] = cand;
                    heap.push(Open::new(cand, 0.0, cand, j));
                }
            });
        }
    }
}

/// Heap entry. Keys are non-negative, so their bit patterns order like the
/// values; ties fall to the smaller heuristic, then the smaller cell index.
#[derive(Debug, Clone, Copy)]
struct Open {
    key: (u64, u64, usize),
    g: f64,
}

impl Open {
    fn new(f: f64, h: f64, g: f64, idx: usize) -> Self {
        Self {
            key: (f.to_bits(), h.to_bits(), idx),
            g,
        }
    }
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    // BinaryHeap is a max-heap; reverse so the smallest key pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.cmp(&self.key)
    }
}
