use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{build_vantage_set, line_of_sight, visible_from, ThreatBelief, ThreatError, ThreatParams, VantageSet, VisibilityParams};
use crate::maps::{Cell, CoverMap, GoalMap, HeightMap, ScalarGrid, ThreatMap};

/// A planned robot path as a sequence of 8-connected cells (repeats allowed).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory(Vec<Cell>);

impl Trajectory {
    pub fn new(cells: Vec<Cell>) -> Result<Self, ThreatError> {
        if cells.is_empty() {
            return Err(ThreatError::EmptyTrajectory);
        }
        for w in cells.windows(2) {
            if !w[0].is_adjacent_or_equal(&w[1]) {
                return Err(ThreatError::Disconnected { from: w[0], to: w[1] });
            }
        }
        Ok(Self(cells))
    }

    pub fn single(cell: Cell) -> Self {
        Self(vec![cell])
    }

    pub fn cells(&self) -> &[Cell] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn start(&self) -> Cell {
        self.0[0]
    }
}

/// Threat level of `cell` from the adversary's side while the robot is at `robot`.
pub trait PerspectiveThreat {
    fn threat(&self, cell: Cell, robot: Cell) -> f64;
}

impl<F: Fn(Cell, Cell) -> f64> PerspectiveThreat for F {
    fn threat(&self, cell: Cell, robot: Cell) -> f64 {
        self(cell, robot)
    }
}

/// Perspective threat from a vantage set on a height map.
pub struct VantageThreat<'a> {
    pub vantages: &'a VantageSet,
    pub height: &'a HeightMap,
    pub visibility: VisibilityParams,
}

impl PerspectiveThreat for VantageThreat<'_> {
    fn threat(&self, cell: Cell, _robot: Cell) -> f64 {
        multi_perspective_threat(cell, self.vantages, self.height, &self.visibility)
    }
}

/// Highest probability among the vantages that see `cell`, or 0.
pub fn multi_perspective_threat(
    cell: Cell,
    vantages: &VantageSet,
    height: &HeightMap,
    visibility: &VisibilityParams,
) -> f64 {
    vantages
        .iter()
        .filter(|v| line_of_sight(height, v.cell, cell, visibility))
        .map(|v| v.probability)
        .fold(0.0, f64::max)
}

/// `max_t gamma^t * tau(cell, r_t)` over the trajectory.
pub fn temporal_visibility_with(
    cell: Cell,
    trajectory: &Trajectory,
    gamma: f64,
    assessor: &impl PerspectiveThreat,
) -> f64 {
    let mut best = 0.0f64;
    let mut weight = 1.0;
    for &r in trajectory.cells() {
        best = best.max(weight * assessor.threat(cell, r));
        weight *= gamma;
    }
    best
}

pub fn temporal_visibility(
    cell: Cell,
    trajectory: &Trajectory,
    gamma: f64,
    vantages: &VantageSet,
    height: &HeightMap,
    visibility: &VisibilityParams,
) -> f64 {
    let assessor = VantageThreat {
        vantages,
        height,
        visibility: *visibility,
    };
    temporal_visibility_with(cell, trajectory, gamma, &assessor)
}

/// Visibility attenuated by cover and scaled by goal proximity channel.
pub fn cover_aware_threat(visibility: f64, cover: f64, goal: f64) -> f64 {
    visibility * (1.0 - cover) * goal
}

pub fn cover_aware_threat_at(
    cell: Cell,
    trajectory: &Trajectory,
    gamma: f64,
    assessor: &impl PerspectiveThreat,
    cover: &CoverMap,
    goal: &GoalMap,
) -> f64 {
    let rho = temporal_visibility_with(cell, trajectory, gamma, assessor);
    cover_aware_threat(rho, cover.get(cell), goal.value(cell))
}

fn check_specs(height: &HeightMap, cover: &CoverMap, goal: &GoalMap) -> Result<(), ThreatError> {
    if height.spec() != cover.spec() || height.spec() != goal.spec() {
        return Err(ThreatError::SpecMismatch);
    }
    Ok(())
}

/// Cover-aware threat of every cell, evaluated directly per cell.
pub fn threat_field(
    belief: &ThreatBelief,
    trajectory: &Trajectory,
    height: &HeightMap,
    cover: &CoverMap,
    goal: &GoalMap,
    params: &ThreatParams,
) -> Result<ThreatMap, ThreatError> {
    check_specs(height, cover, goal)?;
    if belief.spec() != height.spec() {
        return Err(ThreatError::SpecMismatch);
    }
    let vantages = build_vantage_set(belief, params.vantage_capacity, params.mass_floor)?;
    let assessor = VantageThreat {
        vantages: &vantages,
        height,
        visibility: params.visibility,
    };
    let grid = ScalarGrid::from_fn(*height.spec(), |c| {
        cover_aware_threat_at(c, trajectory, params.discount, &assessor, cover, goal)
    });
    Ok(ThreatMap::new(grid).expect("threat values lie in [0, 1]"))
}

/// Incremental threat-field evaluator for one height map. Visibility rasters are
/// cached per vantage cell, so repeated evaluations while the belief sharpens
/// only trace rays for newly promoted vantages.
pub struct ThreatFieldEngine {
    height: HeightMap,
    params: ThreatParams,
    cache: HashMap<Cell, Vec<bool>>,
}

impl ThreatFieldEngine {
    pub fn new(height: HeightMap, params: ThreatParams) -> Self {
        Self {
            height,
            params,
            cache: HashMap::new(),
        }
    }

    pub fn params(&self) -> &ThreatParams {
        &self.params
    }

    pub fn height(&self) -> &HeightMap {
        &self.height
    }

    pub fn cached_rasters(&self) -> usize {
        self.cache.len()
    }

    /// Perspective threat of every cell, row-major.
    pub fn perspective(&mut self, vantages: &VantageSet) -> Vec<f64> {
        let n = self.height.spec().len();
        for v in vantages.iter() {
            if !self.cache.contains_key(&v.cell) {
                let raster = visible_from(&self.height, v.cell, &self.params.visibility);
                self.cache.insert(v.cell, raster);
            }
        }
        let rasters: Vec<(&Vec<bool>, f64)> = vantages
            .iter()
            .map(|v| (&self.cache[&v.cell], v.probability))
            .collect();
        (0..n)
            .map(|k| {
                // vantages are sorted by probability, so the first hit is the max
                rasters
                    .iter()
                    .find(|(r, _)| r[k])
                    .map_or(0.0, |(_, p)| *p)
            })
            .collect()
    }

    pub fn field(
        &mut self,
        belief: &ThreatBelief,
        trajectory: &Trajectory,
        cover: &CoverMap,
        goal: &GoalMap,
    ) -> Result<ThreatMap, ThreatError> {
        check_specs(&self.height, cover, goal)?;
        if belief.spec() != self.height.spec() {
            return Err(ThreatError::SpecMismatch);
        }
        let vantages = build_vantage_set(belief, self.params.vantage_capacity, self.params.mass_floor)?;
        self.field_from_vantages(&vantages, trajectory, cover, goal)
    }

    /// Cover-aware threat field for an explicit vantage set.
    pub fn field_from_vantages(
        &mut self,
        vantages: &VantageSet,
        trajectory: &Trajectory,
        cover: &CoverMap,
        goal: &GoalMap,
    ) -> Result<ThreatMap, ThreatError> {
        check_specs(&self.height, cover, goal)?;
        let tau = self.perspective(vantages);
        // tau does not vary with the robot cell, so the discounted maximum along
        // the trajectory is tau times the largest discount weight
        let gamma = self.params.discount;
        let peak = if gamma > 1.0 {
            gamma.powi(trajectory.len() as i32 - 1)
        } else {
            1.0
        };
        let spec = *self.height.spec();
        let grid = ScalarGrid::from_fn(spec, |c| {
            let k = spec.index(c);
            cover_aware_threat(tau[k] * peak, cover.get(c), goal.value(c))
        });
        Ok(ThreatMap::new(grid).expect("threat values lie in [0, 1]"))
    }
}
