use serde::{Deserialize, Serialize};

use super::MapError;

/// Cell address: `i` indexes x (columns), `j` indexes y (rows).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    /// True when `other` is one of the 8 neighbors of `self` or the same cell.
    pub fn is_adjacent_or_equal(&self, other: &Cell) -> bool {
        self.i.abs_diff(other.i) <= 1 && self.j.abs_diff(other.j) <= 1
    }
}

/// Geometry shared by every grid map: `width` x `height` cells of edge
/// `cell_size` meters, anchored at `(origin_x, origin_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl GridSpec {
    pub fn new(
        width: usize,
        height: usize,
        cell_size: f64,
        origin_x: f64,
        origin_y: f64,
    ) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::InvalidSpec(format!(
                "grid must have at least one cell, got {width}x{height}"
            )));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(MapError::InvalidSpec(format!(
                "cell size must be positive and finite, got {cell_size}"
            )));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(MapError::InvalidSpec("origin must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            cell_size,
            origin_x,
            origin_y,
        })
    }

    /// Smallest grid anchored at the origin that covers `[0, extent_x] x [0, extent_y]`.
    pub fn covering(extent_x: f64, extent_y: f64, cell_size: f64) -> Result<Self, MapError> {
        if !(extent_x > 0.0 && extent_y > 0.0) {
            return Err(MapError::InvalidSpec(format!(
                "extent must be positive, got {extent_x}x{extent_y}"
            )));
        }
        let width = (extent_x / cell_size).ceil() as usize;
        let height = (extent_y / cell_size).ceil() as usize;
        Self::new(width, height, cell_size, 0.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major linear index.
    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        debug_assert!(self.contains(cell));
        cell.j * self.width + cell.i
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    #[inline]
    pub fn contains(&self, cell: Cell) -> bool {
        cell.i < self.width && cell.j < self.height
    }

    /// Converts signed indices into a cell when they land inside the grid.
    #[inline]
    pub fn checked_cell(&self, i: i64, j: i64) -> Option<Cell> {
        if i < 0 || j < 0 || i as u64 >= self.width as u64 || j as u64 >= self.height as u64 {
            None
        } else {
            Some(Cell::new(i as usize, j as usize))
        }
    }

    /// Floor projection of a planar point; `None` when the point falls outside the grid.
    pub fn project(&self, x: f64, y: f64) -> Option<Cell> {
        let fi = ((x - self.origin_x) / self.cell_size).floor();
        let fj = ((y - self.origin_y) / self.cell_size).floor();
        if !fi.is_finite() || !fj.is_finite() {
            return None;
        }
        self.checked_cell(fi as i64, fj as i64)
    }

    pub fn cell_center(&self, cell: Cell) -> (f64, f64) {
        (
            self.origin_x + (cell.i as f64 + 0.5) * self.cell_size,
            self.origin_y + (cell.j as f64 + 0.5) * self.cell_size,
        )
    }

    /// Euclidean distance in meters between two cell centers.
    pub fn center_distance(&self, a: Cell, b: Cell) -> f64 {
        let di = a.i as f64 - b.i as f64;
        let dj = a.j as f64 - b.j as f64;
        (di * di + dj * dj).sqrt() * self.cell_size
    }

    pub fn x_max(&self) -> f64 {
        self.origin_x + self.width as f64 * self.cell_size
    }

    pub fn y_max(&self) -> f64 {
        self.origin_y + self.height as f64 * self.cell_size
    }

    /// Whether the point lies in the half-open extent `[x_min, x_max) x [y_min, y_max)`.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        self.project(x, y).is_some()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(move |k| self.cell_at(k))
    }

    /// In-grid 8-neighbors of `cell`.
    pub fn neighbors8(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        const OFFSETS: [(i64, i64); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        OFFSETS
            .iter()
            .filter_map(move |&(di, dj)| self.checked_cell(cell.i as i64 + di, cell.j as i64 + dj))
    }
}

/// Dense scalar field over a [`GridSpec`], stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarGrid {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn filled(spec: GridSpec, value: f64) -> Self {
        Self {
            spec,
            values: vec![value; spec.len()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self, MapError> {
        if values.len() != spec.len() {
            return Err(MapError::ShapeMismatch {
                expected: spec.len(),
                found: values.len(),
            });
        }
        Ok(Self { spec, values })
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(Cell) -> f64) -> Self {
        let values = (0..spec.len()).map(|k| f(spec.cell_at(k))).collect();
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, cell: Cell) -> f64 {
        self.values[self.spec.index(cell)]
    }

    #[inline]
    pub fn set(&mut self, cell: Cell, value: f64) {
        let k = self.spec.index(cell);
        self.values[k] = value;
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rotates the grid content 90 degrees counter-clockwise `quarter_turns` times.
    /// Cell `(i, j)` of a `W x H` grid moves to `(H - 1 - j, i)` of an `H x W` grid.
    pub fn rotated(&self, quarter_turns: u8) -> ScalarGrid {
        let mut out = self.clone();
        for _ in 0..quarter_turns % 4 {
            let src = &out;
            let w = src.spec.width;
            let h = src.spec.height;
            let spec = GridSpec {
                width: h,
                height: w,
                ..src.spec
            };
            let mut values = vec![0.0; spec.len()];
            for j in 0..h {
                for i in 0..w {
                    let dst = Cell::new(h - 1 - j, i);
                    values[spec.index(dst)] = src.values[j * w + i];
                }
            }
            out = ScalarGrid { spec, values };
        }
        out
    }

    /// Shifts content by whole cells; vacated cells take `fill`, content pushed out is dropped.
    pub fn translated(&self, di: i64, dj: i64, fill: f64) -> ScalarGrid {
        let spec = self.spec;
        let mut values = vec![fill; spec.len()];
        for cell in spec.cells() {
            if let Some(dst) = spec.checked_cell(cell.i as i64 + di, cell.j as i64 + dj) {
                values[spec.index(dst)] = self.values[spec.index(cell)];
            }
        }
        ScalarGrid { spec, values }
    }
}
