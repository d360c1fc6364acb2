//! Grid maps built from point clouds: cover density, maximum height and goal
//! distance/bearing, plus the shared grid geometry and text interchange format.

mod format;
mod grid;

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::worldgen::PointCloud;

pub use format::{format_value, parse_grids, write_grid, GridBlock};
pub use grid::{Cell, GridSpec, ScalarGrid};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("grid shape mismatch: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("point index {index} out of range for cloud of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("goal ({x}, {y}) lies outside the grid extent")]
    GoalOutsideGrid { x: f64, y: f64 },
    #[error("value {value} at cell ({i}, {j}) violates the {role} range")]
    OutOfRange {
        role: &'static str,
        i: usize,
        j: usize,
        value: f64,
    },
    #[error("grid maps do not share one grid spec")]
    SpecMismatch,
    #[error("malformed grid text at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

macro_rules! grid_role {
    ($(#[$meta:meta])* $name:ident, $role:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct $name(ScalarGrid);

        impl $name {
            /// Role tag used in the grid text header.
            pub const ROLE: &'static str = $role;

            pub fn grid(&self) -> &ScalarGrid {
                &self.0
            }

            pub fn into_inner(self) -> ScalarGrid {
                self.0
            }

            pub fn to_text(&self) -> String {
                write_grid(Self::ROLE, &self.0)
            }
        }

        impl Deref for $name {
            type Target = ScalarGrid;

            fn deref(&self) -> &ScalarGrid {
                &self.0
            }
        }
    };
}

grid_role!(
    /// Per-cell fraction of projected points that belong to cover objects, in `[0, 1]`.
    CoverMap,
    "cover"
);
grid_role!(
    /// Per-cell maximum point elevation in meters.
    HeightMap,
    "height"
);
grid_role!(
    /// Per-cell threat level in `[0, 1]`.
    ThreatMap,
    "threat"
);

fn check_unit_range(role: &'static str, grid: &ScalarGrid) -> Result<(), MapError> {
    for (k, &v) in grid.values().iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            let cell = grid.spec().cell_at(k);
            return Err(MapError::OutOfRange {
                role,
                i: cell.i,
                j: cell.j,
                value: v,
            });
        }
    }
    Ok(())
}

impl CoverMap {
    pub fn new(grid: ScalarGrid) -> Result<Self, MapError> {
        check_unit_range(Self::ROLE, &grid)?;
        Ok(Self(grid))
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self(ScalarGrid::filled(spec, 0.0))
    }
}

impl ThreatMap {
    pub fn new(grid: ScalarGrid) -> Result<Self, MapError> {
        check_unit_range(Self::ROLE, &grid)?;
        Ok(Self(grid))
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self(ScalarGrid::filled(spec, 0.0))
    }
}

impl HeightMap {
    pub fn new(grid: ScalarGrid) -> Result<Self, MapError> {
        if let Some(k) = grid.values().iter().position(|v| !v.is_finite()) {
            let cell = grid.spec().cell_at(k);
            return Err(MapError::OutOfRange {
                role: Self::ROLE,
                i: cell.i,
                j: cell.j,
                value: grid.values()[k],
            });
        }
        Ok(Self(grid))
    }

    pub fn flat(spec: GridSpec, level: f64) -> Self {
        Self(ScalarGrid::filled(spec, level))
    }
}

/// Two-channel goal map: normalized distance to the goal and the bearing angle
/// `atan2(y_j - y_g, x_i - x_g)` measured from the goal towards each cell center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalMap {
    goal: (f64, f64),
    distance: ScalarGrid,
    angle: ScalarGrid,
}

impl GoalMap {
    pub const DISTANCE_ROLE: &'static str = "goal_distance";
    pub const ANGLE_ROLE: &'static str = "goal_angle";

    pub fn spec(&self) -> &GridSpec {
        self.distance.spec()
    }

    pub fn goal(&self) -> (f64, f64) {
        self.goal
    }

    pub fn distance(&self) -> &ScalarGrid {
        &self.distance
    }

    pub fn angle(&self) -> &ScalarGrid {
        &self.angle
    }

    /// Normalized distance channel at `cell`.
    pub fn value(&self, cell: Cell) -> f64 {
        self.distance.get(cell)
    }

    pub fn to_text(&self) -> String {
        let mut out = write_grid(Self::DISTANCE_ROLE, &self.distance);
        out.push_str(&write_grid(Self::ANGLE_ROLE, &self.angle));
        out
    }

    /// Reassembles a goal map from its two parsed channels.
    pub fn from_channels(
        goal: (f64, f64),
        distance: ScalarGrid,
        angle: ScalarGrid,
    ) -> Result<Self, MapError> {
        if distance.spec() != angle.spec() {
            return Err(MapError::SpecMismatch);
        }
        Ok(Self {
            goal,
            distance,
            angle,
        })
    }
}

/// Floor projection of `(x, y)` onto the grid, `None` outside it.
pub fn project_point(spec: &GridSpec, x: f64, y: f64) -> Option<Cell> {
    spec.project(x, y)
}

/// Cover density per cell: cover points over all points projected into the cell.
/// Cells that receive no points are 0.
pub fn build_cover_map(
    cloud: &PointCloud,
    cover_indices: &[usize],
    spec: &GridSpec,
) -> Result<CoverMap, MapError> {
    let n = cloud.len();
    let mut is_cover = vec![false; n];
    for &index in cover_indices {
        if index >= n {
            return Err(MapError::IndexOutOfRange { index, len: n });
        }
        is_cover[index] = true;
    }
    let mut total = vec![0u32; spec.len()];
    let mut covered = vec![0u32; spec.len()];
    for (k, p) in cloud.points().iter().enumerate() {
        if let Some(cell) = spec.project(p[0], p[1]) {
            let c = spec.index(cell);
            total[c] += 1;
            if is_cover[k] {
                covered[c] += 1;
            }
        }
    }
    let values = total
        .iter()
        .zip(&covered)
        .map(|(&t, &c)| if t == 0 { 0.0 } else { c as f64 / t as f64 })
        .collect();
    Ok(CoverMap(ScalarGrid::from_values(*spec, values)?))
}

/// Maximum point elevation per cell; cells without points take `empty_fill`.
pub fn build_height_map(cloud: &PointCloud, spec: &GridSpec, empty_fill: f64) -> HeightMap {
    let mut best = vec![f64::NEG_INFINITY; spec.len()];
    for p in cloud.points() {
        if let Some(cell) = spec.project(p[0], p[1]) {
            let c = spec.index(cell);
            if p[2] > best[c] {
                best[c] = p[2];
            }
        }
    }
    for v in &mut best {
        if *v == f64::NEG_INFINITY {
            *v = empty_fill;
        }
    }
    HeightMap(ScalarGrid::from_values(*spec, best).expect("shape fixed by spec"))
}

/// Goal map anchored at cell centers. The distance channel is divided by its
/// maximum so the farthest cell reads exactly 1.
pub fn build_goal_map(spec: &GridSpec, goal: (f64, f64)) -> Result<GoalMap, MapError> {
    let (xg, yg) = goal;
    if !spec.contains_point(xg, yg) {
        return Err(MapError::GoalOutsideGrid { x: xg, y: yg });
    }
    let raw = ScalarGrid::from_fn(*spec, |cell| {
        let (x, y) = spec.cell_center(cell);
        ((x - xg).powi(2) + (y - yg).powi(2)).sqrt()
    });
    let max = raw.max_value();
    let distance = if max > 0.0 {
        let values = raw.values().iter().map(|d| d / max).collect();
        ScalarGrid::from_values(*spec, values)?
    } else {
        ScalarGrid::filled(*spec, 0.0)
    };
    let angle = ScalarGrid::from_fn(*spec, |cell| {
        let (x, y) = spec.cell_center(cell);
        let a = (y - yg).atan2(x - xg);
        // atan2(-0.0, negative) yields -pi; keep the channel in (-pi, pi].
        if a <= -std::f64::consts::PI {
            std::f64::consts::PI
        } else {
            a
        }
    });
    Ok(GoalMap {
        goal,
        distance,
        angle,
    })
}
