//! Offline transition datasets.
//!
//! File layout (`dataset.v1`): the ASCII line `dataset.v1\n`, a little-endian
//! `u32` byte length, a JSON header of that length, then `count` fixed-width
//! 96-byte little-endian records:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 4  | episode (`u32`) |
//! | 4  | 4  | step within episode (`u32`) |
//! | 8  | 2  | augmentation index (`u16`, 0 = original) |
//! | 10 | 1  | action index (`u8`) |
//! | 11 | 1  | terminal flag (`u8`) |
//! | 12 | 5  | state features: cover, threat, height block, distance, bearing |
//! | 17 | 5  | next state features |
//! | 22 | 2  | padding (zero) |
//! | 24 | 8  | reward (`f64`) |
//! | 32 | 24 | pose x, y, heading (`f64` each) |
//! | 56 | 24 | next pose |
//! | 80 | 16 | goal x, y |

use std::f64::consts::FRAC_PI_2;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    extract_features, reward_collision, reward_cover, reward_goal, reward_threat, ActionIndex, ActionMask,
    FeatureInput, RewardTerms, RlError, StateFeatures, TabularTransition, NUM_ACTIONS,
};
use crate::maps::{build_goal_map, Cell, CoverMap, GridSpec, HeightMap, ScalarGrid, ThreatMap};
use crate::raster::segment_cells;
use crate::sim::{
    build_scene, child_seed, feasible_actions, lookahead_point, plan_path, pursue, step, step_budget, wrap_angle,
    CostModel, RobotState, Scene, SceneParams, SimError, SimParams,
};
use crate::threat::{ThreatFieldEngine, ThreatTracker, Trajectory};
use crate::worldgen::World;

pub const DATASET_FORMAT: &str = "dataset.v1";
pub const RECORD_SIZE: usize = 96;
/// Poses are snapped to odd multiples of `1 / (2 * LATTICE)` meters.
pub const LATTICE: f64 = 1024.0;

/// Scripted behavior controllers mixed into the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    RandomWalk,
    StraightToGoal,
    GreedyCover,
    PlanFollower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetParams {
    pub episodes: usize,
    /// Augmented copies per episode, cycling through 90, 180 and 270 degree turns.
    pub augmentations: usize,
    /// Largest random translation per axis, in cells.
    pub max_shift: usize,
    /// Relative frequency of each behavior.
    pub behavior_weights: [(Behavior, f64); 4],
    /// Probability of replacing a scripted action with a random allowed one.
    pub epsilon: f64,
    /// Probability that the random walk ignores the obstacle mask.
    pub unmasked_rate: f64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            episodes: 150,
            augmentations: 3,
            max_shift: 8,
            behavior_weights: [
                (Behavior::RandomWalk, 0.0),
                (Behavior::StraightToGoal, 0.0),
                (Behavior::GreedyCover, 0.0),
                (Behavior::PlanFollower, 1.0),
            ],
            epsilon: 0.15,
            unmasked_rate: 0.1,
        }
    }
}

/// Quarter turns about the grid followed by a whole-cell shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Augmentation {
    pub quarter_turns: u8,
    pub shift: (i64, i64),
}

impl Augmentation {
    pub const IDENTITY: Augmentation = Augmentation {
        quarter_turns: 0,
        shift: (0, 0),
    };

    pub fn spec(&self, base: &GridSpec) -> GridSpec {
        let mut s = *base;
        if self.quarter_turns % 2 == 1 {
            std::mem::swap(&mut s.width, &mut s.height);
        }
        s
    }

    pub fn cell(&self, base: &GridSpec, c: Cell) -> (i64, i64) {
        let (mut i, mut j) = (c.i as i64, c.j as i64);
        let (mut w, mut h) = (base.width as i64, base.height as i64);
        for _ in 0..self.quarter_turns % 4 {
            (i, j) = (h - 1 - j, i);
            std::mem::swap(&mut w, &mut h);
        }
        (i + self.shift.0, j + self.shift.1)
    }

    pub fn point(&self, base: &GridSpec, p: (f64, f64)) -> (f64, f64) {
        let (mut u, mut v) = (p.0 - base.origin_x, p.1 - base.origin_y);
        let (mut w, mut h) = (base.width as f64 * base.cell_size, base.height as f64 * base.cell_size);
        for _ in 0..self.quarter_turns % 4 {
            (u, v) = (h - v, u);
            std::mem::swap(&mut w, &mut h);
        }
        (
            base.origin_x + u + self.shift.0 as f64 * base.cell_size,
            base.origin_y + v + self.shift.1 as f64 * base.cell_size,
        )
    }

    pub fn pose(&self, base: &GridSpec, p: [f64; 3]) -> [f64; 3] {
        let (x, y) = self.point(base, (p[0], p[1]));
        [x, y, wrap_angle(p[2] + self.quarter_turns as f64 * FRAC_PI_2)]
    }

    pub fn grid(&self, g: &ScalarGrid, fill: f64) -> ScalarGrid {
        g.rotated(self.quarter_turns % 4).translated(self.shift.0, self.shift.1, fill)
    }
}

/// Maps of one episode, before augmentation.
#[derive(Debug, Clone)]
pub struct EpisodeMaps {
    pub cover: CoverMap,
    pub height: HeightMap,
    pub threat: ThreatMap,
    pub h_max: f64,
    pub ground: f64,
}

impl EpisodeMaps {
    pub fn augmented(&self, aug: &Augmentation) -> EpisodeMaps {
        EpisodeMaps {
            cover: CoverMap::new(aug.grid(&self.cover, 0.0)).expect("cover stays in range"),
            height: HeightMap::new(aug.grid(&self.height, self.ground)).expect("finite"),
            threat: ThreatMap::new(aug.grid(&self.threat, 0.0)).expect("threat stays in range"),
            h_max: self.h_max,
            ground: self.ground,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeInfo {
    pub episode: u32,
    pub world: usize,
    pub scene_seed: u64,
    pub behavior: Behavior,
    pub steps: usize,
    pub augmentations: Vec<Augmentation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub count: u64,
    pub seed: u64,
    pub grid: Option<GridSpec>,
    pub params: DatasetParams,
    pub scene: SceneParams,
    pub sim: SimParams,
    pub skipped: usize,
    pub episodes: Vec<EpisodeInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub episode: u32,
    pub step: u32,
    pub augmentation: u16,
    pub state: StateFeatures,
    pub action: ActionIndex,
    pub reward: f64,
    pub next_state: StateFeatures,
    pub terminal: bool,
    pub pose: [f64; 3],
    pub next_pose: [f64; 3],
    pub goal: [f64; 2],
}

impl Transition {
    pub fn tabular(&self) -> TabularTransition {
        TabularTransition {
            state: self.state.index(),
            action: self.action.index(),
            reward: self.reward,
            next_state: self.next_state.index(),
            terminal: self.terminal,
        }
    }

    pub fn to_bytes(&self) -> [u8; RECORD_SIZE] {
        let mut b = [0u8; RECORD_SIZE];
        b[0..4].copy_from_slice(&self.episode.to_le_bytes());
        b[4..8].copy_from_slice(&self.step.to_le_bytes());
        b[8..10].copy_from_slice(&self.augmentation.to_le_bytes());
        b[10] = self.action.index() as u8;
        b[11] = self.terminal as u8;
        b[12..17].copy_from_slice(&self.state.to_bytes());
        b[17..22].copy_from_slice(&self.next_state.to_bytes());
        b[24..32].copy_from_slice(&self.reward.to_le_bytes());
        let floats = self.pose.iter().chain(&self.next_pose).chain(&self.goal);
        for (k, v) in floats.enumerate() {
            b[32 + 8 * k..40 + 8 * k].copy_from_slice(&v.to_le_bytes());
        }
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, RlError> {
        if b.len() != RECORD_SIZE {
            return Err(RlError::Format(format!("record must be {RECORD_SIZE} bytes")));
        }
        let f = |k: usize| f64::from_le_bytes(b[k..k + 8].try_into().expect("8 bytes"));
        let feat = |k: usize| {
            StateFeatures::from_bytes(b[k..k + 5].try_into().expect("5 bytes"))
                .ok_or_else(|| RlError::Format("state feature out of range".into()))
        };
        let t = Transition {
            episode: u32::from_le_bytes(b[0..4].try_into().expect("4 bytes")),
            step: u32::from_le_bytes(b[4..8].try_into().expect("4 bytes")),
            augmentation: u16::from_le_bytes(b[8..10].try_into().expect("2 bytes")),
            action: ActionIndex::new(b[10] as usize).ok_or_else(|| RlError::Format("action out of range".into()))?,
            terminal: match b[11] {
                0 => false,
                1 => true,
                _ => return Err(RlError::Format("terminal flag must be 0 or 1".into())),
            },
            state: feat(12)?,
            next_state: feat(17)?,
            reward: f(24),
            pose: [f(32), f(40), f(48)],
            next_pose: [f(56), f(64), f(72)],
            goal: [f(80), f(88)],
        };
        if !t.reward.is_finite() {
            return Err(RlError::Format("non-finite reward".into()));
        }
        Ok(t)
    }
}

/// Transitions with their header; `maps` holds the per-episode base maps of a
/// freshly built dataset and is empty after loading from disk.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub transitions: Vec<Transition>,
    pub maps: Vec<EpisodeMaps>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn tabular(&self) -> Vec<TabularTransition> {
        self.transitions.iter().map(Transition::tabular).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut header = self.header.clone();
        header.count = self.transitions.len() as u64;
        let json = serde_json::to_vec(&header).expect("serializable");
        let mut out = Vec::with_capacity(16 + json.len() + RECORD_SIZE * self.transitions.len());
        out.extend_from_slice(DATASET_FORMAT.as_bytes());
        out.push(b'\n');
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &self.transitions {
            out.extend_from_slice(&t.to_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RlError> {
        let magic = format!("{DATASET_FORMAT}\n");
        let rest = bytes
            .strip_prefix(magic.as_bytes())
            .ok_or_else(|| RlError::Format("missing dataset.v1 magic line".into()))?;
        if rest.len() < 4 {
            return Err(RlError::Format("truncated header length".into()));
        }
        let n = u32::from_le_bytes(rest[0..4].try_into().expect("4 bytes")) as usize;
        let json = rest.get(4..4 + n).ok_or_else(|| RlError::Format("truncated header".into()))?;
        let header: DatasetHeader = serde_json::from_slice(json).map_err(|e| RlError::Format(e.to_string()))?;
        if header.format != DATASET_FORMAT {
            return Err(RlError::Format(format!("unknown format {:?}", header.format)));
        }
        let body = &rest[4 + n..];
        if body.len() % RECORD_SIZE != 0 || (body.len() / RECORD_SIZE) as u64 != header.count {
            return Err(RlError::Format(format!(
                "header announces {} records, body holds {} bytes",
                header.count,
                body.len()
            )));
        }
        let transitions = body
            .chunks(RECORD_SIZE)
            .map(Transition::from_bytes)
            .collect::<Result<_, _>>()?;
        Ok(Self {
            header,
            transitions,
            maps: Vec::new(),
        })
    }
}

/// Snaps a coordinate to the nearest odd multiple of `1 / (2 * LATTICE)`.
pub fn snap(x: f64) -> f64 {
    ((x * LATTICE).floor() + 0.5) / LATTICE
}

fn euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    (dx * dx + dy * dy).sqrt()
}

/// Reward of moving from `pose` to `next_pose` on the given maps. Sums are
/// order-independent and, for lattice poses, exact under augmentation.
pub fn score_transition(
    maps: &EpisodeMaps,
    pose: [f64; 3],
    next_pose: [f64; 3],
    goal: (f64, f64),
    weights: &super::RewardWeights,
) -> (RewardTerms, bool) {
    let spec = maps.cover.spec();
    let from = (pose[0], pose[1]);
    let to = (next_pose[0], next_pose[1]);
    let swept = segment_cells(spec, from, to);
    let occupied: Vec<Cell> = spec.project(from.0, from.1).into_iter().collect();
    let mut collision = reward_collision(&maps.height, &swept.cells, maps.h_max, weights.collision);
    if swept.leaves_grid {
        collision = -weights.collision;
    }
    let terms = RewardTerms {
        cover: reward_cover(&maps.cover, &swept.cells, weights.cover),
        threat: reward_threat(&maps.threat, &occupied, weights.threat),
        goal: reward_goal(euclid(from, goal), euclid(to, goal), weights.goal),
        collision,
    };
    (terms, collision != 0.0)
}

struct Rollout {
    poses: Vec<[f64; 3]>,
    actions: Vec<ActionIndex>,
}

fn pick_behavior(weights: &[(Behavior, f64); 4], rng: &mut ChaCha8Rng) -> Behavior {
    let total: f64 = weights.iter().map(|w| w.1.max(0.0)).sum();
    let mut u = rng.random_range(0.0..total.max(f64::MIN_POSITIVE));
    for (b, w) in weights {
        if u < *w {
            return *b;
        }
        u -= w.max(0.0);
    }
    weights[3].0
}

fn random_allowed(mask: &ActionMask, rng: &mut ChaCha8Rng) -> ActionIndex {
    let allowed: Vec<ActionIndex> = mask.allowed().collect();
    *allowed.choose(rng).unwrap_or(&ActionIndex::STOP)
}

#[allow(clippy::too_many_arguments)]
fn roll_out(
    scene: &Scene,
    maps: &EpisodeMaps,
    plan: Option<&[Cell]>,
    cover_plan: Option<&[Cell]>,
    behavior: Behavior,
    params: &DatasetParams,
    sim: &SimParams,
    rng: &mut ChaCha8Rng,
) -> Rollout {
    let spec = *scene.spec();
    let max_steps = step_budget(scene, sim);
    let start = scene.start;
    let mut robot = RobotState::new(snap(start.x), snap(start.y), start.heading);
    let mut poses = vec![[robot.x, robot.y, robot.heading]];
    let mut actions = Vec::new();
    let mut progress = 0usize;
    for _ in 0..max_steps {
        let mask = feasible_actions(&robot, &maps.height, maps.h_max, sim.dt);
        let follow = |path: Option<&[Cell]>, progress: &mut usize| match path {
            Some(p) => {
                let (t, near) = lookahead_point(&maps.height, maps.h_max, p, *progress, robot.position(), sim.waypoint_lookahead);
                *progress = near;
                pursue(&robot, t, &mask, sim.dt)
            }
            None => pursue(&robot, scene.goal, &mask, sim.dt),
        };
        let mut action = match behavior {
            Behavior::RandomWalk => {
                if rng.random_bool(params.unmasked_rate) {
                    // in-grid moves only, so collisions come from tall cells
                    let mut in_grid = ActionMask::none();
                    for a in ActionIndex::all() {
                        let next = step(&robot, a.velocities(), sim.dt);
                        in_grid.set(a, !segment_cells(&spec, robot.position(), next.position()).leaves_grid);
                    }
                    random_allowed(&in_grid, rng)
                } else {
                    random_allowed(&mask, rng)
                }
            }
            Behavior::StraightToGoal => pursue(&robot, scene.goal, &mask, sim.dt),
            Behavior::GreedyCover => follow(cover_plan, &mut progress),
            Behavior::PlanFollower => follow(plan, &mut progress),
        };
        if behavior != Behavior::RandomWalk && rng.random_bool(params.epsilon) {
            action = random_allowed(&mask, rng);
        }
        let next = step(&robot, action.velocities(), sim.dt);
        let next = RobotState {
            x: snap(next.x),
            y: snap(next.y),
            ..next
        };
        let pose = [next.x, next.y, next.heading];
        let (_, collided) = score_transition(maps, poses[poses.len() - 1], pose, scene.goal, &sim.rewards);
        actions.push(action);
        poses.push(pose);
        robot = next;
        if collided || euclid(robot.position(), scene.goal) <= sim.goal_radius {
            break;
        }
    }
    Rollout { poses, actions }
}

/// Range of shifts per axis that keeps `cells` (already rotated) inside `spec`.
fn shift_range(cells: &[(i64, i64)], spec: &GridSpec) -> ((i64, i64), (i64, i64)) {
    let imin = cells.iter().map(|c| c.0).min().unwrap_or(0);
    let imax = cells.iter().map(|c| c.0).max().unwrap_or(0);
    let jmin = cells.iter().map(|c| c.1).min().unwrap_or(0);
    let jmax = cells.iter().map(|c| c.1).max().unwrap_or(0);
    ((-imin, spec.width as i64 - 1 - imax), (-jmin, spec.height as i64 - 1 - jmax))
}

/// Synthesizes an augmented offline dataset from scripted behavior on `worlds`.
/// Episode `e` uses world `e % worlds.len()`. Scenes without a feasible start/goal
/// pair are skipped and counted in the header.
pub fn build_dataset(
    worlds: &[World],
    params: &DatasetParams,
    scene_params: &SceneParams,
    sim: &SimParams,
    seed: u64,
) -> Result<Dataset, SimError> {
    let mut header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        count: 0,
        seed,
        grid: None,
        params: params.clone(),
        scene: *scene_params,
        sim: *sim,
        skipped: 0,
        episodes: Vec::new(),
    };
    let mut transitions = Vec::new();
    let mut all_maps = Vec::new();
    if worlds.is_empty() || params.episodes == 0 {
        return Ok(Dataset {
            header,
            transitions,
            maps: all_maps,
        });
    }
    for e in 0..params.episodes {
        let world_index = e % worlds.len();
        let scene_seed = child_seed(seed, &[e as u64, 0x5c]);
        let scene = match build_scene(&worlds[world_index], scene_params, scene_seed) {
            Ok(s) => s,
            Err(SimError::Infeasible(reason)) => {
                log::info!("episode {e} skipped: {reason}");
                header.skipped += 1;
                continue;
            }
            Err(err) => return Err(err),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, &[e as u64, 0xb7]));
        let spec = *scene.spec();
        header.grid.get_or_insert(spec);
        let episode = header.episodes.len() as u32;

        // static threat field from the intel prior along the initial plan
        let (s_cell, g_cell) = (scene.start_cell(), scene.goal_cell());
        let intel: Vec<Vec<Cell>> = scene.threats.iter().map(|t| t.route()).collect();
        let tracker = ThreatTracker::from_intel(spec, &intel, sim.prior_weight, sim.prior_sigma_cells)?;
        let vantages = tracker.vantages(sim.threat.vantage_capacity, sim.threat.mass_floor)?;
        let goal_map = build_goal_map(&spec, scene.goal)?;
        let initial = plan_path(&scene.height, s_cell, g_cell, scene.h_max, CostModel::Shortest)
            .map(Trajectory::new)
            .transpose()?
            .unwrap_or_else(|| Trajectory::single(s_cell));
        let threat = ThreatFieldEngine::new(scene.height.clone(), sim.threat).field_from_vantages(&vantages, &initial, &scene.cover, &goal_map)?;
        let plan = plan_path(
            &scene.height,
            s_cell,
            g_cell,
            scene.h_max,
            CostModel::CoverThreat {
                cover: &scene.cover,
                threat: &threat,
                weight: sim.threat_cost_weight,
            },
        );
        let cover_plan = plan_path(&scene.height, s_cell, g_cell, scene.h_max, CostModel::Cover(&scene.cover));
        let maps = EpisodeMaps {
            cover: scene.cover.clone(),
            height: scene.height.clone(),
            threat,
            h_max: scene.h_max,
            ground: scene.world.ground_z,
        };
        let behavior = pick_behavior(&params.behavior_weights, &mut rng);
        let rollout = roll_out(
            &scene,
            &maps,
            plan.as_deref(),
            cover_plan.as_deref(),
            behavior,
            params,
            sim,
            &mut rng,
        );

        // cells the episode touches, for choosing shifts that keep it in-grid
        let mut touched: Vec<Cell> = Vec::new();
        for w in rollout.poses.windows(2) {
            touched.extend(segment_cells(&spec, (w[0][0], w[0][1]), (w[1][0], w[1][1])).cells);
        }
        touched.extend(plan.iter().flatten().copied());
        touched.extend(spec.project(scene.goal.0, scene.goal.1));
        let mut augs = vec![Augmentation::IDENTITY];
        for k in 0..params.augmentations {
            let quarter_turns = (k % 3 + 1) as u8;
            let rotated = Augmentation {
                quarter_turns,
                shift: (0, 0),
            };
            let cells: Vec<(i64, i64)> = touched.iter().map(|c| rotated.cell(&spec, *c)).collect();
            let aspec = rotated.spec(&spec);
            let ((ilo, ihi), (jlo, jhi)) = shift_range(&cells, &aspec);
            let m = params.max_shift as i64;
            let pick = |rng: &mut ChaCha8Rng, lo: i64, hi: i64| {
                let (lo, hi) = (lo.max(-m), hi.min(m));
                if lo > hi {
                    0
                } else {
                    rng.random_range(lo..=hi)
                }
            };
            let shift = (pick(&mut rng, ilo, ihi), pick(&mut rng, jlo, jhi));
            augs.push(Augmentation { quarter_turns, shift });
        }

        for (ai, aug) in augs.iter().enumerate() {
            let amaps = if ai == 0 { maps.clone() } else { maps.augmented(aug) };
            let aspec = aug.spec(&spec);
            let goal = aug.point(&spec, scene.goal);
            let aplan: Option<Vec<Cell>> = plan.as_ref().map(|p| {
                p.iter()
                    .map(|c| {
                        let (i, j) = aug.cell(&spec, *c);
                        aspec.checked_cell(i, j).expect("shift keeps plan in-grid")
                    })
                    .collect()
            });
            let poses: Vec<[f64; 3]> = rollout.poses.iter().map(|p| aug.pose(&spec, *p)).collect();
            let mut progress = 0usize;
            let mut featurize = |pose: [f64; 3]| {
                let target = match &aplan {
                    Some(p) => {
                        let (t, near) = lookahead_point(&amaps.height, amaps.h_max, p, progress, (pose[0], pose[1]), sim.waypoint_lookahead);
                        progress = near;
                        t
                    }
                    None => goal,
                };
                extract_features(
                    &FeatureInput {
                        cover: &amaps.cover,
                        threat: &amaps.threat,
                        height: &amaps.height,
                        pose: (pose[0], pose[1], pose[2]),
                        goal,
                        heading_target: target,
                    },
                    &sim.features,
                    amaps.h_max,
                )
            };
            let feats: Vec<StateFeatures> = poses.iter().map(|p| featurize(*p)).collect();
            for (k, a) in rollout.actions.iter().enumerate() {
                let (terms, collided) = score_transition(&amaps, poses[k], poses[k + 1], goal, &sim.rewards);
                let reached = euclid((poses[k + 1][0], poses[k + 1][1]), goal) <= sim.goal_radius;
                transitions.push(Transition {
                    episode,
                    step: k as u32,
                    augmentation: ai as u16,
                    state: feats[k],
                    action: *a,
                    reward: terms.total(),
                    next_state: feats[k + 1],
                    terminal: collided || reached,
                    pose: poses[k],
                    next_pose: poses[k + 1],
                    goal: [goal.0, goal.1],
                });
            }
        }
        header.episodes.push(EpisodeInfo {
            episode,
            world: world_index,
            scene_seed,
            behavior,
            steps: rollout.actions.len(),
            augmentations: augs,
        });
        all_maps.push(maps);
    }
    header.count = transitions.len() as u64;
    debug_assert!(transitions.iter().all(|t| t.action.index() < NUM_ACTIONS));
    Ok(Dataset {
        header,
        transitions,
        maps: all_maps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn augmentation_point_matches_cell_map() {
        let spec = GridSpec::new(6, 4, 0.5, 0.0, 0.0).unwrap();
        for q in 0..4u8 {
            let aug = Augmentation {
                quarter_turns: q,
                shift: (1, -1),
            };
            let aspec = aug.spec(&spec);
            for c in spec.cells() {
                let p = aug.point(&spec, spec.cell_center(c));
                let (i, j) = aug.cell(&spec, c);
                assert_eq!(aspec.cell_center(Cell::new((i + 10) as usize, (j + 10) as usize)).0 - 5.0, p.0);
                assert_eq!(aspec.cell_center(Cell::new((i + 10) as usize, (j + 10) as usize)).1 - 5.0, p.1);
            }
        }
    }

    #[test]
    fn snapping_is_odd_lattice() {
        let s = snap(1.2345);
        assert_eq!((s * LATTICE * 2.0) % 2.0, 1.0);
        assert!((s - 1.2345).abs() < 1.0 / LATTICE);
    }
}
