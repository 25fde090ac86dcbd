//! Indoor environment generation.
//!
//! Rooms come from recursive division of the map interior: the largest room
//! still below the depth limit is cut by a one-cell wall at a random offset
//! and one door of the configured width is punched through that wall. After
//! the layout is fixed, furniture rectangles are rejection-sampled inside the
//! rooms, manipulation objects are dropped on every placed piece and the
//! pedestrian spawn distribution is computed from per-region weights.
//!
//! Generated maps guarantee:
//! - all free cells form one 4-connected component,
//! - no furniture cell lies within the door clearance radius of a door cell,
//! - every object sits on a furniture cell.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::determinism::Stream;
use crate::geom::{Cell, CellRect, Point};

#[derive(Debug, Error, PartialEq)]
pub enum WorldgenError {
    #[error("invalid environment parameters: {0}")]
    InvalidParams(String),
    #[error("generation failed: {0}")]
    GenerationFailed(String),
    #[error("spawn weights are all zero")]
    AllZeroWeights,
    #[error("invalid spawn weights: {0}")]
    InvalidWeights(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Free,
    Wall,
    Furniture,
}

impl CellKind {
    fn code(self) -> char {
        match self {
            CellKind::Free => 'F',
            CellKind::Wall => 'W',
            CellKind::Furniture => 'U',
        }
    }

    fn from_code(c: char) -> Option<Self> {
        match c {
            'F' => Some(CellKind::Free),
            'W' => Some(CellKind::Wall),
            'U' => Some(CellKind::Furniture),
            _ => None,
        }
    }
}

/// Pedestrian spawn weights per region class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpawnWeights {
    /// Weight of every room-interior cell.
    pub room: f64,
    /// Weight of interior door cells.
    pub door: f64,
    /// Weight of map-entrance cells.
    pub entrance: f64,
    /// Optional per-room override, indexed by room id.
    pub per_room: Option<Vec<f64>>,
}

impl Default for SpawnWeights {
    fn default() -> Self {
        Self {
            room: 1.0,
            door: 2.0,
            entrance: 4.0,
            per_room: None,
        }
    }
}

/// Environment generation parameters. Lengths are in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvParams {
    pub width_m: f64,
    pub height_m: f64,
    /// Meters per grid cell.
    pub resolution: f64,
    pub min_room_m: f64,
    pub door_width_m: f64,
    pub max_depth: u32,
    /// Upper bound of furniture pieces per room.
    pub furniture_per_room: u32,
    /// Rejection-sampling attempts per furniture piece.
    pub furniture_retries: u32,
    pub furniture_min_m: f64,
    pub furniture_max_m: f64,
    pub objects_per_furniture: u32,
    /// Chebyshev clearance kept free of furniture around door cells.
    /// Defaults to the door width.
    pub door_clearance_m: Option<f64>,
    pub spawn_weights: SpawnWeights,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            width_m: 12.0,
            height_m: 12.0,
            resolution: 0.1,
            min_room_m: 3.0,
            door_width_m: 1.0,
            max_depth: 3,
            furniture_per_room: 2,
            furniture_retries: 40,
            furniture_min_m: 0.5,
            furniture_max_m: 1.2,
            objects_per_furniture: 2,
            door_clearance_m: None,
            spawn_weights: SpawnWeights::default(),
        }
    }
}

fn to_cells(meters: f64, resolution: f64) -> usize {
    (meters / resolution - 1e-9).ceil().max(1.0) as usize
}

impl EnvParams {
    pub fn validate(&self) -> Result<(), WorldgenError> {
        let bad = |msg: &str| Err(WorldgenError::InvalidParams(msg.to_string()));
        let positive = [
            self.width_m,
            self.height_m,
            self.resolution,
            self.min_room_m,
            self.door_width_m,
            self.furniture_min_m,
            self.furniture_max_m,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("all dimensions must be positive and finite");
        }
        if self.min_room_m < 2.0 * self.door_width_m {
            return bad("min room dimension must be at least twice the door width");
        }
        if self.furniture_min_m > self.furniture_max_m {
            return bad("furniture min size exceeds max size");
        }
        if let Some(c) = self.door_clearance_m {
            if !(c.is_finite() && c >= 0.0) {
                return bad("door clearance must be non-negative");
            }
        }
        Ok(())
    }

    pub fn cols(&self) -> usize {
        (self.width_m / self.resolution).round() as usize
    }

    pub fn rows(&self) -> usize {
        (self.height_m / self.resolution).round() as usize
    }

    fn min_room_cells(&self) -> usize {
        to_cells(self.min_room_m, self.resolution)
    }

    fn door_cells(&self) -> usize {
        to_cells(self.door_width_m, self.resolution)
    }

    fn clearance_cells(&self) -> usize {
        let m = self.door_clearance_m.unwrap_or(self.door_width_m);
        if m == 0.0 {
            0
        } else {
            to_cells(m, self.resolution)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: usize,
    /// Interior cells (walls excluded).
    pub rect: CellRect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Door {
    pub cells: Vec<Cell>,
    /// True for the single opening in the outer boundary.
    pub entrance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurniturePiece {
    pub id: usize,
    pub room: usize,
    pub rect: CellRect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipObject {
    pub id: usize,
    pub furniture: usize,
    pub cell: Cell,
    pub position: Point,
}

/// Static indoor map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentMap {
    pub width_m: f64,
    pub height_m: f64,
    pub resolution: f64,
    pub cols: usize,
    pub rows: usize,
    #[serde(with = "rle")]
    pub static_grid: Vec<CellKind>,
    pub rooms: Vec<Room>,
    pub doors: Vec<Door>,
    pub furniture: Vec<FurniturePiece>,
    pub objects: Vec<ManipObject>,
    pub door_clearance_cells: usize,
    pub spawn_weights: SpawnWeights,
    #[serde(skip)]
    pub spawn_prob: SpawnDistribution,
}

impl EnvironmentMap {
    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        c.y * self.cols + c.x
    }

    #[inline]
    pub fn cell_at(&self, idx: usize) -> Cell {
        Cell::new(idx % self.cols, idx / self.cols)
    }

    pub fn kind(&self, c: Cell) -> CellKind {
        self.static_grid[self.index(c)]
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.kind(c) == CellKind::Free
    }

    pub fn in_bounds(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width() && p.y < self.height()
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.resolution
    }

    pub fn height(&self) -> f64 {
        self.rows as f64 * self.resolution
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Cell containing `p`, clamped to the grid.
    pub fn cell_of(&self, p: Point) -> Cell {
        let cx = (p.x / self.resolution).floor().clamp(0.0, (self.cols - 1) as f64) as usize;
        let cy = (p.y / self.resolution).floor().clamp(0.0, (self.rows - 1) as f64) as usize;
        Cell::new(cx, cy)
    }

    pub fn center(&self, c: Cell) -> Point {
        Point::new(
            (c.x as f64 + 0.5) * self.resolution,
            (c.y as f64 + 0.5) * self.resolution,
        )
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.static_grid
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == CellKind::Free)
            .map(|(i, _)| self.cell_at(i))
    }

    pub fn door_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.doors.iter().flat_map(|d| d.cells.iter().copied())
    }

    /// Free cell nearest to the map center; the robot's home position.
    pub fn dock_cell(&self) -> Cell {
        let mid = Point::new(self.width() / 2.0, self.height() / 2.0);
        self.free_cells()
            .min_by(|a, b| {
                self.center(*a)
                    .dist(mid)
                    .total_cmp(&self.center(*b).dist(mid))
                    .then(self.index(*a).cmp(&self.index(*b)))
            })
            .expect("map has free cells")
    }

    /// Free cell next to the object's furniture piece that is closest to the
    /// object. This is where the robot stands to manipulate it.
    pub fn approach_cell(&self, object: &ManipObject) -> Option<Cell> {
        let rect = self.furniture[object.furniture].rect;
        let ring = CellRect {
            x0: rect.x0.saturating_sub(1),
            y0: rect.y0.saturating_sub(1),
            x1: (rect.x1 + 1).min(self.cols - 1),
            y1: (rect.y1 + 1).min(self.rows - 1),
        };
        ring.cells()
            .filter(|c| !rect.contains(*c) && self.is_free(*c))
            .min_by(|a, b| {
                self.center(*a)
                    .dist(object.position)
                    .total_cmp(&self.center(*b).dist(object.position))
                    .then(self.index(*a).cmp(&self.index(*b)))
            })
    }

    /// Region class of a free cell, used for spawn weighting.
    pub fn region(&self, c: Cell) -> Option<Region> {
        if !self.is_free(c) {
            return None;
        }
        for d in &self.doors {
            if d.cells.contains(&c) {
                return Some(if d.entrance {
                    Region::Entrance
                } else {
                    Region::Door
                });
            }
        }
        self.rooms
            .iter()
            .find(|r| r.rect.contains(c))
            .map(|r| Region::Room(r.id))
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let mut map: EnvironmentMap = serde_json::from_str(s)?;
        if map.static_grid.len() != map.cols * map.rows {
            return Err("grid length does not match dimensions".into());
        }
        map.spawn_prob = build_spawn_probability(&map, &map.spawn_weights)?;
        Ok(map)
    }

    /// SVG rendering: walls black, furniture blue, objects dark blue,
    /// spawn probability as green shading.
    pub fn to_svg(&self, scale: f64) -> String {
        use std::fmt::Write;
        let w = self.cols as f64 * scale;
        let h = self.rows as f64 * scale;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let max_p = self
            .spawn_prob
            .prob
            .iter()
            .copied()
            .fold(0.0f64, f64::max);
        for y in 0..self.rows {
            // screen y grows downward
            let sy = (self.rows - 1 - y) as f64 * scale;
            let mut x = 0;
            while x < self.cols {
                let c = Cell::new(x, y);
                let kind = self.kind(c);
                let p = self.spawn_prob.prob.get(self.index(c)).copied().unwrap_or(0.0);
                let mut end = x + 1;
                while end < self.cols {
                    let n = Cell::new(end, y);
                    let pn = self.spawn_prob.prob.get(self.index(n)).copied().unwrap_or(0.0);
                    if self.kind(n) != kind || pn != p {
                        break;
                    }
                    end += 1;
                }
                let fill = match kind {
                    CellKind::Wall => Some("black".to_string()),
                    CellKind::Furniture => Some("#4a7bd0".to_string()),
                    CellKind::Free if p > 0.0 && max_p > 0.0 => {
                        let a = 0.15 + 0.75 * (p / max_p);
                        Some(format!("rgba(0,140,0,{a:.3})"))
                    }
                    CellKind::Free => None,
                };
                if let Some(fill) = fill {
                    let _ = writeln!(
                        s,
                        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                        x as f64 * scale,
                        sy,
                        (end - x) as f64 * scale,
                        scale,
                        fill
                    );
                }
                x = end;
            }
        }
        for o in &self.objects {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#10306b"/>"##,
                (o.cell.x as f64 + 0.5) * scale,
                (self.rows as f64 - o.cell.y as f64 - 0.5) * scale,
                scale * 0.8
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Room(usize),
    Door,
    Entrance,
}

/// Normalized per-cell spawn distribution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpawnDistribution {
    /// Probability of every grid cell (row-major).
    pub prob: Vec<f64>,
    support: Vec<usize>,
    cumulative: Vec<f64>,
}

impl SpawnDistribution {
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Point mass on a single cell index.
    pub fn point_mass(cells: usize, idx: usize) -> Self {
        let mut prob = vec![0.0; cells];
        prob[idx] = 1.0;
        Self::from_prob(prob)
    }

    /// Build from already normalized (or raw) weights.
    pub fn from_prob(prob: Vec<f64>) -> Self {
        let mut support = Vec::new();
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (i, &p) in prob.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                support.push(i);
                cumulative.push(acc);
            }
        }
        Self {
            prob,
            support,
            cumulative,
        }
    }
}

/// Per-cell pedestrian spawn distribution for `map`.
///
/// Every free cell receives the weight of its region class; walls and
/// furniture receive zero. The result sums to one.
pub fn build_spawn_probability(
    map: &EnvironmentMap,
    weights: &SpawnWeights,
) -> Result<SpawnDistribution, WorldgenError> {
    let mut all = vec![weights.room, weights.door, weights.entrance];
    if let Some(per_room) = &weights.per_room {
        if per_room.len() != map.rooms.len() {
            return Err(WorldgenError::InvalidWeights(format!(
                "{} per-room weights for {} rooms",
                per_room.len(),
                map.rooms.len()
            )));
        }
        all.extend_from_slice(per_room);
    }
    if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(WorldgenError::InvalidWeights(
            "weights must be finite and non-negative".into(),
        ));
    }

    let mut class = vec![0.0; map.static_grid.len()];
    for room in &map.rooms {
        let w = weights
            .per_room
            .as_ref()
            .map_or(weights.room, |v| v[room.id]);
        for c in room.rect.cells() {
            if map.is_free(c) {
                class[map.index(c)] = w;
            }
        }
    }
    for d in &map.doors {
        let w = if d.entrance {
            weights.entrance
        } else {
            weights.door
        };
        for &c in &d.cells {
            class[map.index(c)] = w;
        }
    }
    let total: f64 = class.iter().sum();
    if total <= 0.0 {
        return Err(WorldgenError::AllZeroWeights);
    }
    for p in &mut class {
        *p /= total;
    }
    Ok(SpawnDistribution::from_prob(class))
}

/// Draw a cell index with probability proportional to its weight.
pub fn sample_spawn(dist: &SpawnDistribution, stream: &mut Stream) -> usize {
    let total = *dist.cumulative.last().expect("non-empty distribution");
    let u = stream.next_f64() * total;
    let pos = dist.cumulative.partition_point(|&c| c <= u);
    dist.support[pos.min(dist.support.len() - 1)]
}

struct Builder<'a> {
    params: &'a EnvParams,
    cols: usize,
    rows: usize,
    grid: Vec<CellKind>,
    door_cells: usize,
    min_room: usize,
}

impl Builder<'_> {
    fn idx(&self, x: usize, y: usize) -> usize {
        y * self.cols + x
    }

    fn at(&self, x: usize, y: usize) -> CellKind {
        self.grid[self.idx(x, y)]
    }

    fn set(&mut self, x: usize, y: usize, k: CellKind) {
        let i = self.idx(x, y);
        self.grid[i] = k;
    }

    /// Wall positions that keep both halves at least `min_room` wide and do
    /// not end against an existing door opening.
    fn split_candidates(&self, r: &CellRect, vertical: bool) -> Vec<usize> {
        let (lo, hi) = if vertical { (r.x0, r.x1) } else { (r.y0, r.y1) };
        if hi + 1 - lo < 2 * self.min_room + 1 {
            return Vec::new();
        }
        (lo + self.min_room..=hi - self.min_room)
            .filter(|&p| {
                if vertical {
                    self.at(p, r.y0 - 1) == CellKind::Wall && self.at(p, r.y1 + 1) == CellKind::Wall
                } else {
                    self.at(r.x0 - 1, p) == CellKind::Wall && self.at(r.x1 + 1, p) == CellKind::Wall
                }
            })
            .collect()
    }

    fn divide(&mut self, stream: &mut Stream) -> (Vec<CellRect>, Vec<Door>) {
        let mut rooms: Vec<(CellRect, u32)> = vec![(
            CellRect {
                x0: 1,
                y0: 1,
                x1: self.cols - 2,
                y1: self.rows - 2,
            },
            0,
        )];
        let mut doors = Vec::new();
        loop {
            let mut best: Option<(usize, Vec<usize>, Vec<usize>)> = None;
            for (i, (r, depth)) in rooms.iter().enumerate() {
                if *depth >= self.params.max_depth {
                    continue;
                }
                let v = self.split_candidates(r, true);
                let h = self.split_candidates(r, false);
                if v.is_empty() && h.is_empty() {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((j, _, _)) => r.area() > rooms[*j].0.area(),
                };
                if better {
                    best = Some((i, v, h));
                }
            }
            let Some((i, v, h)) = best else { break };
            let (r, depth) = rooms[i];
            let vertical = match (v.is_empty(), h.is_empty()) {
                (false, true) => true,
                (true, false) => false,
                _ => {
                    if r.width() != r.height() {
                        r.width() > r.height()
                    } else {
                        stream.chance(0.5)
                    }
                }
            };
            let cands = if vertical { &v } else { &h };
            let pos = cands[stream.index(cands.len())];
            let mut door = Vec::with_capacity(self.door_cells);
            let (a, b) = if vertical {
                for y in r.y0..=r.y1 {
                    self.set(pos, y, CellKind::Wall);
                }
                let start = r.y0 + stream.index(r.height() - self.door_cells + 1);
                for y in start..start + self.door_cells {
                    self.set(pos, y, CellKind::Free);
                    door.push(Cell::new(pos, y));
                }
                (
                    CellRect { x1: pos - 1, ..r },
                    CellRect { x0: pos + 1, ..r },
                )
            } else {
                for x in r.x0..=r.x1 {
                    self.set(x, pos, CellKind::Wall);
                }
                let start = r.x0 + stream.index(r.width() - self.door_cells + 1);
                for x in start..start + self.door_cells {
                    self.set(x, pos, CellKind::Free);
                    door.push(Cell::new(x, pos));
                }
                (
                    CellRect { y1: pos - 1, ..r },
                    CellRect { y0: pos + 1, ..r },
                )
            };
            doors.push(Door {
                cells: door,
                entrance: false,
            });
            rooms[i] = (a, depth + 1);
            rooms.push((b, depth + 1));
        }
        (rooms.into_iter().map(|(r, _)| r).collect(), doors)
    }

    /// One opening of door width in the outer wall, backed by room cells.
    fn entrance(&mut self, stream: &mut Stream) -> Option<Door> {
        let (c, r) = (self.cols, self.rows);
        let dw = self.door_cells;
        // (start cell, step, inward offset) for each side
        let mut spans: Vec<Vec<Cell>> = Vec::new();
        let sides: [(bool, usize, usize); 4] = [
            (true, 0, 1),
            (true, r - 1, r - 2),
            (false, 0, 1),
            (false, c - 1, c - 2),
        ];
        for (horizontal, line, inward) in sides {
            let len = if horizontal { c } else { r };
            if len < dw + 2 {
                continue;
            }
            for start in 1..=len - 1 - dw {
                let ok = (start..start + dw).all(|k| {
                    if horizontal {
                        self.at(k, inward) == CellKind::Free
                    } else {
                        self.at(inward, k) == CellKind::Free
                    }
                });
                if ok {
                    spans.push(
                        (start..start + dw)
                            .map(|k| {
                                if horizontal {
                                    Cell::new(k, line)
                                } else {
                                    Cell::new(line, k)
                                }
                            })
                            .collect(),
                    );
                }
            }
        }
        if spans.is_empty() {
            return None;
        }
        let cells = spans.swap_remove(stream.index(spans.len()));
        for cell in &cells {
            self.set(cell.x, cell.y, CellKind::Free);
        }
        Some(Door {
            cells,
            entrance: true,
        })
    }
}

/// 4-connected flood fill from `start` over cells where `passable` holds.
pub fn flood_fill(cols: usize, rows: usize, start: usize, passable: impl Fn(usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; cols * rows];
    if !passable(start) {
        return seen;
    }
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % cols, i / cols);
        let mut visit = |j: usize| {
            if !seen[j] && passable(j) {
                seen[j] = true;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < cols {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - cols);
        }
        if y + 1 < rows {
            visit(i + cols);
        }
    }
    seen
}

fn free_connected(cols: usize, rows: usize, grid: &[CellKind]) -> bool {
    let Some(start) = grid.iter().position(|k| *k == CellKind::Free) else {
        return false;
    };
    let seen = flood_fill(cols, rows, start, |i| grid[i] == CellKind::Free);
    grid.iter()
        .zip(&seen)
        .all(|(k, s)| *k != CellKind::Free || *s)
}

/// Generate an environment map. Pure in `(params, seed)`.
pub fn generate_environment(params: &EnvParams, seed: u64) -> Result<EnvironmentMap, WorldgenError> {
    params.validate()?;
    let (cols, rows) = (params.cols(), params.rows());
    let min_room = params.min_room_cells();
    if cols < min_room + 2 || rows < min_room + 2 {
        return Err(WorldgenError::GenerationFailed(format!(
            "a {cols}x{rows} cell map cannot hold a room of {min_room} cells"
        )));
    }
    let root = Stream::new(seed);
    let mut b = Builder {
        params,
        cols,
        rows,
        grid: vec![CellKind::Wall; cols * rows],
        door_cells: params.door_cells(),
        min_room,
    };
    for y in 1..rows - 1 {
        for x in 1..cols - 1 {
            b.set(x, y, CellKind::Free);
        }
    }

    let (rects, mut doors) = b.divide(&mut root.fork("division"));
    if let Some(entrance) = b.entrance(&mut root.fork("entrance")) {
        doors.push(entrance);
    }

    let clearance = params.clearance_cells();
    let mut near_door = vec![false; cols * rows];
    for d in &doors {
        for c in &d.cells {
            let (x0, x1) = (c.x.saturating_sub(clearance), (c.x + clearance).min(cols - 1));
            let (y0, y1) = (c.y.saturating_sub(clearance), (c.y + clearance).min(rows - 1));
            for y in y0..=y1 {
                for x in x0..=x1 {
                    near_door[y * cols + x] = true;
                }
            }
        }
    }

    let mut furniture_stream = root.fork("furniture");
    let mut furniture: Vec<FurniturePiece> = Vec::new();
    let fmin = to_cells(params.furniture_min_m, params.resolution);
    let fmax = to_cells(params.furniture_max_m, params.resolution).max(fmin);
    for (room_id, r) in rects.iter().enumerate() {
        // a piece keeps a free ring of one cell inside the room
        if r.width() < 3 || r.height() < 3 {
            continue;
        }
        for _ in 0..params.furniture_per_room {
            for _ in 0..params.furniture_retries.max(1) {
                let max_w = fmax.min(r.width() - 2);
                let max_h = fmax.min(r.height() - 2);
                if max_w == 0 || max_h == 0 {
                    break;
                }
                let w = furniture_stream.range_inclusive(fmin.min(max_w) as i64, max_w as i64) as usize;
                let h = furniture_stream.range_inclusive(fmin.min(max_h) as i64, max_h as i64) as usize;
                let x0 = r.x0 + 1 + furniture_stream.index(r.width() - 2 - w + 1);
                let y0 = r.y0 + 1 + furniture_stream.index(r.height() - 2 - h + 1);
                let rect = CellRect {
                    x0,
                    y0,
                    x1: x0 + w - 1,
                    y1: y0 + h - 1,
                };
                let ring = CellRect {
                    x0: x0 - 1,
                    y0: y0 - 1,
                    x1: rect.x1 + 1,
                    y1: rect.y1 + 1,
                };
                let ring_free = ring.cells().all(|c| b.at(c.x, c.y) == CellKind::Free);
                let clear = rect.cells().all(|c| !near_door[c.y * cols + c.x]);
                if !(ring_free && clear) {
                    continue;
                }
                for c in rect.cells() {
                    b.set(c.x, c.y, CellKind::Furniture);
                }
                if free_connected(cols, rows, &b.grid) {
                    furniture.push(FurniturePiece {
                        id: furniture.len(),
                        room: room_id,
                        rect,
                    });
                    break;
                }
                for c in rect.cells() {
                    b.set(c.x, c.y, CellKind::Free);
                }
            }
        }
    }

    let mut object_stream = root.fork("objects");
    let mut objects = Vec::new();
    for piece in &furniture {
        let mut cells: Vec<Cell> = piece.rect.cells().collect();
        for _ in 0..params.objects_per_furniture {
            let cell = if cells.is_empty() {
                let all: Vec<Cell> = piece.rect.cells().collect();
                all[object_stream.index(all.len())]
            } else {
                cells.swap_remove(object_stream.index(cells.len()))
            };
            objects.push(ManipObject {
                id: objects.len(),
                furniture: piece.id,
                cell,
                position: Point::new(
                    (cell.x as f64 + 0.5) * params.resolution,
                    (cell.y as f64 + 0.5) * params.resolution,
                ),
            });
        }
    }

    let mut map = EnvironmentMap {
        width_m: params.width_m,
        height_m: params.height_m,
        resolution: params.resolution,
        cols,
        rows,
        static_grid: b.grid,
        rooms: rects
            .into_iter()
            .enumerate()
            .map(|(id, rect)| Room { id, rect })
            .collect(),
        doors,
        furniture,
        objects,
        door_clearance_cells: clearance,
        spawn_weights: params.spawn_weights.clone(),
        spawn_prob: SpawnDistribution::default(),
    };
    if !free_connected(cols, rows, &map.static_grid) {
        return Err(WorldgenError::GenerationFailed(
            "free space is not connected".into(),
        ));
    }
    map.spawn_prob = match build_spawn_probability(&map, &params.spawn_weights) {
        Ok(d) => d,
        Err(WorldgenError::AllZeroWeights) => {
            return Err(WorldgenError::InvalidParams("spawn weights are all zero".into()))
        }
        Err(e) => return Err(e),
    };
    Ok(map)
}

mod rle {
    use super::CellKind;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(grid: &[CellKind], s: S) -> Result<S::Ok, S::Error> {
        let mut runs: Vec<(char, usize)> = Vec::new();
        for k in grid {
            match runs.last_mut() {
                Some((c, n)) if *c == k.code() => *n += 1,
                _ => runs.push((k.code(), 1)),
            }
        }
        let encoded: Vec<String> = runs.iter().map(|(c, n)| format!("{n}{c}")).collect();
        encoded.join(" ").serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<CellKind>, D::Error> {
        let text = String::deserialize(d)?;
        let mut grid = Vec::new();
        for token in text.split_whitespace() {
            let (num, code) = token.split_at(token.len() - 1);
            let kind = CellKind::from_code(code.chars().next().unwrap_or('?'))
                .ok_or_else(|| serde::de::Error::custom(format!("bad cell code in {token}")))?;
            let n: usize = num.parse().map_err(serde::de::Error::custom)?;
            grid.extend(std::iter::repeat_n(kind, n));
        }
        Ok(grid)
    }
}
