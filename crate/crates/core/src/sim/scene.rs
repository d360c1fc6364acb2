use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::plan::{plan_path, reachable, CostModel};
use super::threats::{Motion, ThreatAgent};
use super::{RobotState, SimError};
use crate::maps::{build_cover_map, build_height_map, Cell, CoverMap, GridSpec, HeightMap};
use crate::perception::{segment_cover, ClusterParams, CoverThresholds, Segmentation};
use crate::raster::center_ray_cells;
use crate::threat::{line_of_sight, VisibilityParams};
use crate::worldgen::{sample_labeled_point_cloud, CloudParams, PointCloud, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneParams {
    pub cell_size: f64,
    /// Tallest traversable cell height, meters.
    pub h_max: f64,
    /// The robot is hidden from threats inside cells at least this tall, meters.
    pub concealment_height: f64,
    /// Start-goal straight-line distance range, meters.
    pub goal_range: (f64, f64),
    pub threat_count: usize,
    /// Probability that a placed threat patrols instead of standing still.
    pub patrol_fraction: f64,
    pub patrol_period: u32,
    pub threat_visibility: VisibilityParams,
    /// Threats are kept at least this far from the start, meters.
    pub threat_standoff: f64,
    /// Only accept scenes with a start-goal route no threat position can see.
    pub require_covert_route: bool,
    pub cloud: CloudParams,
    pub cluster: ClusterParams,
    pub cover_thresholds: CoverThresholds,
    pub max_tries: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            cell_size: 0.5,
            h_max: 1.5,
            concealment_height: 0.5,
            goal_range: (10.0, 30.0),
            threat_count: 2,
            patrol_fraction: 0.5,
            patrol_period: 3,
            threat_visibility: VisibilityParams::default(),
            threat_standoff: 8.0,
            require_covert_route: true,
            cloud: CloudParams::default(),
            cluster: ClusterParams::default(),
            cover_thresholds: CoverThresholds::default(),
            max_tries: 200,
        }
    }
}

/// Output of the perception stage for one world.
#[derive(Debug, Clone)]
pub struct Perception {
    pub cloud: PointCloud,
    pub segmentation: Segmentation,
    pub cover: CoverMap,
    pub height: HeightMap,
}

/// Samples a cloud of `world`, finds cover and builds the cover and height maps.
pub fn perceive(world: &World, params: &SceneParams, seed: u64) -> Result<Perception, SimError> {
    let spec = GridSpec::covering(world.extent_x, world.extent_y, params.cell_size)?;
    let (cloud, _) = sample_labeled_point_cloud(world, &params.cloud, seed)?;
    let segmentation = segment_cover(&cloud, &params.cluster, &params.cover_thresholds)?;
    let cover = build_cover_map(&cloud, &segmentation.cover_indices, &spec)?;
    let height = build_height_map(&cloud, &spec, world.ground_z);
    Ok(Perception {
        cloud,
        segmentation,
        cover,
        height,
    })
}

/// A world with perceived maps, a start, a goal and threat agents.
#[derive(Debug, Clone)]
pub struct Scene {
    pub world: World,
    pub cover: CoverMap,
    pub height: HeightMap,
    pub h_max: f64,
    pub concealment_height: f64,
    pub start: RobotState,
    pub goal: (f64, f64),
    pub threats: Vec<ThreatAgent>,
    pub seed: u64,
}

impl Scene {
    pub fn spec(&self) -> &GridSpec {
        self.height.spec()
    }

    pub fn passable(&self, c: Cell) -> bool {
        self.height.get(c) <= self.h_max
    }

    /// True when some threat position, along any patrol route, could detect a
    /// robot in `c`.
    pub fn exposed(&self, c: Cell) -> bool {
        exposed(&self.height, &self.threats, self.concealment_height, c)
    }

    pub fn start_cell(&self) -> Cell {
        self.spec().project(self.start.x, self.start.y).expect("start inside grid")
    }

    pub fn goal_cell(&self) -> Cell {
        self.spec().project(self.goal.0, self.goal.1).expect("goal inside grid")
    }
}

fn open_cell(height: &HeightMap, c: Cell, h_max: f64) -> bool {
    height.get(c) <= h_max
        && height.spec().neighbors8(c).count() == 8
        && height.spec().neighbors8(c).all(|n| height.get(n) <= h_max)
}

fn exposed(height: &HeightMap, threats: &[ThreatAgent], concealment_height: f64, c: Cell) -> bool {
    height.get(c) < concealment_height
        && threats.iter().any(|t| {
            t.route()
                .into_iter()
                .any(|p| line_of_sight(height, p, c, &t.visibility))
        })
}

/// Builds a scene: perception, a start/goal pair joined by a plannable path, and
/// threats placed where they overlook the straight start-goal line. With
/// `require_covert_route`, pairs are redrawn until some route avoids every cell
/// a threat could see.
pub fn build_scene(world: &World, params: &SceneParams, seed: u64) -> Result<Scene, SimError> {
    let p = perceive(world, params, seed)?;
    let spec = *p.height.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ce_2e00_0000_0000);
    let open: Vec<Cell> = spec.cells().filter(|c| open_cell(&p.height, *c, params.h_max)).collect();
    if open.len() < 2 {
        return Err(SimError::Infeasible("no open cells".into()));
    }
    let (lo, hi) = params.goal_range;
    let mut chosen = None;
    for _ in 0..params.max_tries {
        let s = *open.choose(&mut rng).expect("non-empty");
        let g = *open.choose(&mut rng).expect("non-empty");
        let d = spec.center_distance(s, g);
        if d < lo || d > hi {
            continue;
        }
        if plan_path(&p.height, s, g, params.h_max, CostModel::Shortest).is_none() {
            continue;
        }
        let threats = place_threats(&p.height, s, g, params, &mut rng);
        if params.require_covert_route {
            let hidden = |c: Cell| p.height.get(c) <= params.h_max && !exposed(&p.height, &threats, params.concealment_height, c);
            if !reachable(&spec, s, g, hidden) {
                continue;
            }
        }
        chosen = Some((s, g, threats));
        break;
    }
    let (s, g, threats) = chosen.ok_or_else(|| SimError::Infeasible(format!("no start/goal pair after {} tries", params.max_tries)))?;
    let (sx, sy) = spec.cell_center(s);
    let heading = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    Ok(Scene {
        world: world.clone(),
        cover: p.cover,
        height: p.height,
        h_max: params.h_max,
        concealment_height: params.concealment_height,
        start: RobotState::new(sx, sy, heading),
        goal: spec.cell_center(g),
        threats,
        seed,
    })
}

fn place_threats(height: &HeightMap, start: Cell, goal: Cell, params: &SceneParams, rng: &mut ChaCha8Rng) -> Vec<ThreatAgent> {
    let spec = height.spec();
    let vis = params.threat_visibility;
    let line = center_ray_cells(start, goal);
    let probe = |c: Cell| ThreatAgent::fixed(c, vis);
    let mut scored: Vec<(Cell, usize)> = spec
        .cells()
        .filter(|c| height.get(*c) <= params.h_max)
        .filter(|c| spec.center_distance(*c, start) >= params.threat_standoff)
        .filter(|c| line.iter().any(|l| spec.center_distance(*c, *l) <= vis.max_range))
        .filter_map(|c| {
            let t = probe(c);
            if t.sees(height, start) || t.sees(height, goal) || line.contains(&c) {
                return None;
            }
            let score = line.iter().filter(|l| t.sees(height, **l)).count();
            (score > 0).then_some((c, score))
        })
        .collect();
    let mut threats: Vec<ThreatAgent> = Vec::new();
    for _ in 0..params.threat_count {
        scored.retain(|(c, _)| threats.iter().all(|t| spec.center_distance(t.position, *c) >= 6.0));
        let Some(best) = scored.iter().map(|(_, s)| *s).max() else {
            break;
        };
        let good: Vec<Cell> = scored.iter().filter(|(_, s)| 2 * s >= best).map(|(c, _)| *c).collect();
        let position = *good.choose(rng).expect("non-empty");
        let patrol = rng.random_bool(params.patrol_fraction.clamp(0.0, 1.0));
        let motion = if patrol {
            let near: Vec<Cell> = good
                .iter()
                .copied()
                .filter(|c| {
                    let d = spec.center_distance(*c, position);
                    (3.0..=6.0).contains(&d)
                })
                .collect();
            match near.choose(rng) {
                Some(&other) => Motion::Patrol {
                    waypoints: vec![other, position],
                    period: params.patrol_period,
                },
                None => Motion::Static,
            }
        } else {
            Motion::Static
        };
        threats.push(ThreatAgent {
            position,
            visibility: vis,
            motion,
            next_waypoint: 0,
        });
    }
    if threats.len() < params.threat_count {
        log::debug!("placed {} of {} threats", threats.len(), params.threat_count);
    }
    threats
}
