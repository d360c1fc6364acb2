//! Closed-loop simulation: unicycle kinematics, action masking, velocity
//! modulation, threat agents, planners and baselines, episode metrics and
//! multi-trial suites.

mod episode;
mod kinematics;
mod plan;
mod scene;
mod suite;
mod threats;

use thiserror::Error;

pub use episode::{
    lookahead_point, pursue, run_episode, step_budget, EpisodeMetrics, Policy, SimParams, Termination, Trace,
    TraceHeader, TraceStep, TRACE_FORMAT,
};
pub use kinematics::{
    command_feasible, feasible_actions, modulate_velocity, obstacle_density, step, swept_cells, wrap_angle,
    RobotState,
};
pub use plan::{astar, octile, path_length, plan_path, reachable, CostModel};
pub use scene::{build_scene, perceive, Perception, Scene, SceneParams};
pub use suite::{
    aggregate, build_suite_scenes, child_seed, comparison, mix_seed, policy_summary, run_suite, suite_csv,
    AggregateRow, SuiteScene, TrialRecord, CSV_HEADER,
};
pub use threats::{detect, Motion, ThreatAgent};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Map(#[from] crate::maps::MapError),
    #[error(transparent)]
    World(#[from] crate::worldgen::WorldError),
    #[error(transparent)]
    Perception(#[from] crate::perception::PerceptionError),
    #[error(transparent)]
    Threat(#[from] crate::threat::ThreatError),
    #[error(transparent)]
    Rl(#[from] crate::rl::RlError),
}

/// Recomputes episode metrics from a trace.
pub fn replay_metrics(trace: &Trace) -> EpisodeMetrics {
    let h = &trace.header;
    let n = trace.steps.len();
    let mut length = 0.0;
    let (mut detected, mut covered, mut streak) = (0usize, 0usize, 0usize);
    for s in &trace.steps {
        length += (s.pose_after[0] - s.pose_before[0]).hypot(s.pose_after[1] - s.pose_before[1]);
        if s.detected {
            detected += 1;
            streak += 1;
        } else {
            streak = 0;
        }
        if s.cover >= h.cover_threshold {
            covered += 1;
        }
    }
    let last_pos = trace
        .steps
        .last()
        .map_or((h.start.x, h.start.y), |s| (s.pose_after[0], s.pose_after[1]));
    let termination = if trace.steps.last().is_some_and(|s| s.collision) {
        Termination::Collision
    } else if (h.goal.0 - last_pos.0).hypot(h.goal.1 - last_pos.1) <= h.goal_radius {
        Termination::Goal
    } else if streak >= h.detection_persistence && n > 0 {
        Termination::Detected
    } else {
        Termination::Timeout
    };
    let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    EpisodeMetrics {
        success: termination == Termination::Goal,
        navigation_time: n as f64 * h.dt,
        trajectory_length: length,
        threat_exposure: frac(detected),
        cover_utilization: frac(covered),
        termination,
        steps: n,
    }
}
