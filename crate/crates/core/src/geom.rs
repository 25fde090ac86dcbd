use serde::{Deserialize, Serialize};

/// A position in meters, origin at the lower-left map corner.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Move from `self` toward `to` by at most `step` meters.
    pub fn toward(self, to: Point, step: f64) -> Point {
        let d = self.dist(to);
        if d <= step || d == 0.0 {
            return to;
        }
        let k = step / d;
        Point::new(self.x + (to.x - self.x) * k, self.y + (to.y - self.y) * k)
    }
}

/// Integer cell coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn chebyshev(self, other: Cell) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

/// Inclusive axis-aligned rectangle of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CellRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, c: Cell) -> bool {
        (self.x0..=self.x1).contains(&c.x) && (self.y0..=self.y1).contains(&c.y)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| Cell::new(x, y)))
    }

    /// Chebyshev distance from a cell to the nearest cell of the rectangle.
    pub fn chebyshev_to(&self, c: Cell) -> usize {
        let dx = if c.x < self.x0 {
            self.x0 - c.x
        } else {
            c.x.saturating_sub(self.x1)
        };
        let dy = if c.y < self.y0 {
            self.y0 - c.y
        } else {
            c.y.saturating_sub(self.y1)
        };
        dx.max(dy)
    }
}
