use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kinematics::{command_feasible, feasible_actions, modulate_velocity, obstacle_density, step, swept_cells};
use super::plan::{octile, path_length, plan_path, reachable, CostModel};
use super::scene::Scene;
use super::threats::detect;
use super::{RobotState, SimError};
use crate::maps::{build_goal_map, Cell, HeightMap, ThreatMap};
use crate::raster::segment_cells;
use crate::rl::{
    extract_features, greedy_action, reward_collision, reward_cover, reward_goal, reward_threat, ActionIndex,
    FeatureInput, FeatureParams, QFunction, RewardTerms, RewardWeights, V_MAX,
};
use crate::threat::{ObservationModel, ThreatTracker, ThreatFieldEngine, ThreatParams, Trajectory};

pub const TRACE_FORMAT: &str = "trace.v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub dt: f64,
    pub goal_radius: f64,
    /// Consecutive detected steps that end an episode.
    pub detection_persistence: usize,
    /// Cover density at or above which a step counts as in cover.
    pub cover_threshold: f64,
    /// Step budget as a multiple of the shortest-path step count.
    pub timeout_factor: f64,
    pub min_timeout_steps: usize,
    pub threat: ThreatParams,
    pub observation: ObservationModel,
    /// Share of prior belief mass placed around the initially reported threat cells.
    pub prior_weight: f64,
    pub prior_sigma_cells: f64,
    /// Share of each track's mass diffused to neighboring cells before every scan.
    pub belief_diffusion: f64,
    /// Weight of the threat field in the planner's edge cost.
    pub threat_cost_weight: f64,
    /// Distance along the plan to the point the policy heads for, meters.
    pub waypoint_lookahead: f64,
    pub features: FeatureParams,
    pub rewards: RewardWeights,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 0.2,
            goal_radius: 0.5,
            detection_persistence: 3,
            cover_threshold: 0.5,
            timeout_factor: 4.0,
            min_timeout_steps: 50,
            threat: ThreatParams::default(),
            observation: ObservationModel::default(),
            prior_weight: 0.9,
            prior_sigma_cells: 0.5,
            belief_diffusion: 0.2,
            threat_cost_weight: 3000.0,
            waypoint_lookahead: 2.0,
            features: FeatureParams::default(),
            rewards: RewardWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Greedy learned policy on the threat-aware plan; `threat_field: false`
    /// zeroes the threat map (ablation).
    Cql { q: &'a QFunction, threat_field: bool },
    /// Pursuit of the threat-aware plan itself, without the learned policy.
    Planner,
    ShortestPath,
    GreedyCover,
}

impl Policy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Cql { threat_field: true, .. } => "cql",
            Policy::Cql { threat_field: false, .. } => "cql_no_threat",
            Policy::Planner => "planner",
            Policy::ShortestPath => "shortest_path",
            Policy::GreedyCover => "greedy_cover",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Goal,
    Detected,
    Collision,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success: bool,
    pub navigation_time: f64,
    pub trajectory_length: f64,
    pub threat_exposure: f64,
    pub cover_utilization: f64,
    pub termination: Termination,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub policy: String,
    pub seed: u64,
    pub start: RobotState,
    pub goal: (f64, f64),
    pub goal_radius: f64,
    pub dt: f64,
    pub cover_threshold: f64,
    pub detection_persistence: usize,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub pose_before: [f64; 3],
    pub pose_after: [f64; 3],
    pub action: u8,
    pub v: f64,
    pub omega: f64,
    pub rewards: RewardTerms,
    pub reward: f64,
    pub detected: bool,
    pub collision: bool,
    pub cell: [usize; 2],
    pub cover: f64,
    pub threat: f64,
    pub traversed: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    /// One JSON object per line: the header, then one line per step.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("serializable");
        out.push('\n');
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SimError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let first = lines.next().ok_or_else(|| SimError::Format("empty trace".into()))?;
        let header: TraceHeader = serde_json::from_str(first).map_err(|e| SimError::Format(e.to_string()))?;
        if header.format != TRACE_FORMAT {
            return Err(SimError::Format(format!("unknown trace format {:?}", header.format)));
        }
        let steps = lines
            .map(|l| serde_json::from_str(l).map_err(|e| SimError::Format(e.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(Self { header, steps })
    }
}

/// Pursuit target on `path`: starting at the cell nearest to `from` (searching
/// from `progress` on), the farthest cell within `lookahead` meters of path
/// length that `from` reaches by a straight traversable segment. Returns the
/// target point and the index of the nearest cell.
pub fn lookahead_point(
    height: &HeightMap,
    h_max: f64,
    path: &[Cell],
    progress: usize,
    from: (f64, f64),
    lookahead: f64,
) -> ((f64, f64), usize) {
    let spec = height.spec();
    let dist = |c: Cell| {
        let (x, y) = spec.cell_center(c);
        (x - from.0).hypot(y - from.1)
    };
    let first = progress.min(path.len() - 1);
    let mut nearest = first;
    for k in first..path.len() {
        if dist(path[k]) < dist(path[nearest]) {
            nearest = k;
        }
    }
    let clear = |c: Cell| {
        let seg = segment_cells(spec, from, spec.cell_center(c));
        !seg.leaves_grid && seg.cells.iter().all(|x| height.get(*x) <= h_max)
    };
    let mut target = (nearest + 1).min(path.len() - 1);
    let mut acc = 0.0;
    let mut k = nearest;
    while k + 1 < path.len() {
        acc += spec.center_distance(path[k], path[k + 1]);
        k += 1;
        if acc > lookahead || !clear(path[k]) {
            break;
        }
        target = k;
    }
    (spec.cell_center(path[target]), nearest)
}

/// Discrete pursuit: the allowed action whose one-step result is closest to
/// `target`, with a penalty on the remaining heading error.
pub fn pursue(robot: &RobotState, target: (f64, f64), mask: &crate::rl::ActionMask, dt: f64) -> ActionIndex {
    let mut best = (ActionIndex::STOP, f64::INFINITY);
    for a in mask.allowed() {
        let next = step(robot, a.velocities(), dt);
        let bearing = (target.1 - next.y).atan2(target.0 - next.x);
        let err = super::kinematics::wrap_angle(bearing - next.heading).abs();
        let score = next.distance_to(target) + 0.3 * err;
        if score < best.1 {
            best = (a, score);
        }
    }
    best.0
}

fn cell_pair(c: Cell) -> [usize; 2] {
    [c.i, c.j]
}

/// Step budget: `timeout_factor` times the shortest-path step count at top speed.
pub fn step_budget(scene: &Scene, params: &SimParams) -> usize {
    let spec = scene.spec();
    let (s, g) = (scene.start_cell(), scene.goal_cell());
    let len = plan_path(&scene.height, s, g, scene.h_max, CostModel::Shortest)
        .map(|p| path_length(spec, &p))
        .unwrap_or_else(|| octile(spec, s, g));
    let base = (len / (V_MAX * params.dt)).ceil() as usize;
    ((params.timeout_factor * base as f64).ceil() as usize).max(params.min_timeout_steps)
}

/// Runs one closed-loop episode.
pub fn run_episode(scene: &Scene, policy: Policy<'_>, params: &SimParams, seed: u64) -> Result<(EpisodeMetrics, Trace), SimError> {
    if params.dt.is_nan() || params.dt <= 0.0 {
        return Err(SimError::BadParams("dt must be positive".into()));
    }
    let spec = *scene.spec();
    let start_cell = scene.start_cell();
    let goal_cell = scene.goal_cell();
    if !reachable(&spec, start_cell, goal_cell, |c| scene.passable(c)) {
        return Err(SimError::Infeasible("goal unreachable from start".into()));
    }
    let max_steps = step_budget(scene, params);
    let goal_map = build_goal_map(&spec, scene.goal)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut threats = scene.threats.clone();
    let intel: Vec<Vec<Cell>> = threats.iter().map(|t| t.route()).collect();
    let mut tracker = ThreatTracker::from_intel(spec, &intel, params.prior_weight, params.prior_sigma_cells)?;
    let mut engine = ThreatFieldEngine::new(scene.height.clone(), params.threat);
    let zero_threat = ThreatMap::zeros(spec);

    // fixed plans for the baselines
    let fixed_plan = match policy {
        Policy::ShortestPath => plan_path(&scene.height, start_cell, goal_cell, scene.h_max, CostModel::Shortest),
        Policy::GreedyCover => plan_path(&scene.height, start_cell, goal_cell, scene.h_max, CostModel::Cover(&scene.cover)),
        Policy::Cql { .. } | Policy::Planner => None,
    };
    let mut progress = 0usize;
    let mut trajectory = Trajectory::single(start_cell);

    let mut robot = scene.start;
    let mut steps: Vec<TraceStep> = Vec::new();
    let mut length = 0.0;
    let (mut detected_steps, mut cover_steps, mut streak) = (0usize, 0usize, 0usize);
    let mut termination = Termination::Timeout;

    if robot.distance_to(scene.goal) <= params.goal_radius {
        termination = Termination::Goal;
    }
    while termination != Termination::Goal && steps.len() < max_steps {
        let k = steps.len();
        let cell = spec.project(robot.x, robot.y).ok_or_else(|| SimError::Infeasible("robot left the grid".into()))?;

        let mut threat_map = None;
        let action = match policy {
            Policy::Cql { .. } | Policy::Planner => {
                let threat_field = !matches!(policy, Policy::Cql { threat_field: false, .. });
                let tmap = if threat_field {
                    if k > 0 {
                        tracker.predict(params.belief_diffusion);
                    }
                    let obs = params.observation.observe(&scene.height, cell, &intel_now(&threats), &mut rng);
                    tracker.update(&obs, &params.observation)?;
                    let vantages = tracker.vantages(params.threat.vantage_capacity, params.threat.mass_floor)?;
                    engine.field_from_vantages(&vantages, &trajectory, &scene.cover, &goal_map)?
                } else {
                    zero_threat.clone()
                };
                let cost = CostModel::CoverThreat {
                    cover: &scene.cover,
                    threat: &tmap,
                    weight: params.threat_cost_weight,
                };
                let target = match plan_path(&scene.height, cell, goal_cell, scene.h_max, cost) {
                    Some(plan) => {
                        let (t, _) = lookahead_point(&scene.height, scene.h_max, &plan, 0, robot.position(), params.waypoint_lookahead);
                        trajectory = Trajectory::new(plan)?;
                        t
                    }
                    None => scene.goal,
                };
                let mask = feasible_actions(&robot, &scene.height, scene.h_max, params.dt);
                let action = match policy {
                    Policy::Cql { q, .. } => {
                        let features = extract_features(
                            &FeatureInput {
                                cover: &scene.cover,
                                threat: &tmap,
                                height: &scene.height,
                                pose: robot.pose(),
                                goal: scene.goal,
                                heading_target: target,
                            },
                            &params.features,
                            scene.h_max,
                        );
                        greedy_action(q, &features, &mask)?
                    }
                    _ => pursue(&robot, target, &mask, params.dt),
                };
                threat_map = Some(tmap);
                action
            }
            Policy::ShortestPath | Policy::GreedyCover => match &fixed_plan {
                Some(plan) => {
                    let (target, near) = lookahead_point(&scene.height, scene.h_max, plan, progress, robot.position(), params.waypoint_lookahead);
                    progress = near;
                    let mask = feasible_actions(&robot, &scene.height, scene.h_max, params.dt);
                    pursue(&robot, target, &mask, params.dt)
                }
                None => ActionIndex::STOP,
            },
        };
        let tmap = threat_map.as_ref().unwrap_or(&zero_threat);
        let threat_level = tmap.get(cell);
        let density = obstacle_density(&scene.height, cell, scene.h_max);
        let mut command = modulate_velocity(action.velocities(), threat_level, density);
        if !command_feasible(&robot, command, &scene.height, scene.h_max, params.dt) {
            command = (0.0, 0.0);
        }
        let next = step(&robot, command, params.dt);
        let swept = swept_cells(&spec, &robot, &next);
        let collision = swept.leaves_grid || swept.cells.iter().any(|c| !scene.passable(*c));
        let next_cell = spec.project(next.x, next.y);

        for t in &mut threats {
            t.advance(k);
        }
        let detected = detect(next_cell, &threats, &scene.height, scene.concealment_height);
        let w = &params.rewards;
        let rewards = RewardTerms {
            cover: reward_cover(&scene.cover, &swept.cells, w.cover),
            threat: reward_threat(tmap, &[cell], w.threat),
            goal: reward_goal(robot.distance_to(scene.goal), next.distance_to(scene.goal), w.goal),
            collision: if swept.leaves_grid {
                -w.collision
            } else {
                reward_collision(&scene.height, &swept.cells, scene.h_max, w.collision)
            },
        };
        let after_cell = next_cell.unwrap_or(cell);
        let cover_here = scene.cover.get(after_cell);
        steps.push(TraceStep {
            step: k,
            pose_before: [robot.x, robot.y, robot.heading],
            pose_after: [next.x, next.y, next.heading],
            action: action.index() as u8,
            v: command.0,
            omega: command.1,
            rewards,
            reward: rewards.total(),
            detected,
            collision,
            cell: cell_pair(after_cell),
            cover: cover_here,
            threat: tmap.get(after_cell),
            traversed: swept.cells.iter().map(|c| cell_pair(*c)).collect(),
        });

        length += (next.x - robot.x).hypot(next.y - robot.y);
        if detected {
            detected_steps += 1;
            streak += 1;
        } else {
            streak = 0;
        }
        if cover_here >= params.cover_threshold {
            cover_steps += 1;
        }
        robot = next;
        if collision {
            termination = Termination::Collision;
            break;
        }
        if robot.distance_to(scene.goal) <= params.goal_radius {
            termination = Termination::Goal;
            break;
        }
        if streak >= params.detection_persistence {
            termination = Termination::Detected;
            break;
        }
    }
    let n = steps.len();
    let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
    let metrics = EpisodeMetrics {
        success: termination == Termination::Goal,
        navigation_time: n as f64 * params.dt,
        trajectory_length: length,
        threat_exposure: frac(detected_steps),
        cover_utilization: frac(cover_steps),
        termination,
        steps: n,
    };
    let trace = Trace {
        header: TraceHeader {
            format: TRACE_FORMAT.into(),
            policy: policy.name().into(),
            seed,
            start: scene.start,
            goal: scene.goal,
            goal_radius: params.goal_radius,
            dt: params.dt,
            cover_threshold: params.cover_threshold,
            detection_persistence: params.detection_persistence,
            max_steps,
        },
        steps,
    };
    Ok((metrics, trace))
}

fn intel_now(threats: &[super::ThreatAgent]) -> Vec<Cell> {
    threats.iter().map(|t| t.position).collect()
}
