//! Threat-aware visibility: a Bayesian threat belief over grid cells, binary
//! line-of-sight on the height map, a prioritized vantage set, and the
//! per-cell threat measures built on top of them (perspective threat,
//! discounted trajectory visibility, cover-aware threat). Several threats are
//! followed by a [`ThreatTracker`] holding one belief each.

mod assess;
mod belief;
mod los;
mod observe;
mod tracker;
mod vantage;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assess::{
    cover_aware_threat, cover_aware_threat_at, multi_perspective_threat, temporal_visibility,
    temporal_visibility_with, threat_field, PerspectiveThreat, ThreatFieldEngine, Trajectory,
    VantageThreat,
};
pub use belief::{belief_update, ThreatBelief};
pub use los::{line_of_sight, visibility_grid, visible_from};
pub use observe::{Observation, ObservationModel};
pub use tracker::ThreatTracker;
pub use vantage::{build_vantage_set, merge_vantage_sets, Vantage, VantageSet};

#[derive(Debug, Error, PartialEq)]
pub enum ThreatError {
    #[error("likelihood vector has {found} entries, belief has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("likelihood at index {index} is {value}; likelihoods must be finite and non-negative")]
    BadLikelihood { index: usize, value: f64 },
    #[error("observation leaves no probability mass; belief left unchanged")]
    DegenerateEvidence,
    #[error("belief weights must be finite, non-negative and not all zero")]
    BadWeights,
    #[error("vantage capacity must be at least 1")]
    ZeroCapacity,
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("trajectory steps {from:?} -> {to:?} are not 8-neighbor adjacent")]
    Disconnected {
        from: crate::maps::Cell,
        to: crate::maps::Cell,
    },
    #[error("maps do not share one grid spec")]
    SpecMismatch,
}

/// Sensing geometry of a threat: eye height (cells at least this tall block the
/// view) and maximum viewing range in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisibilityParams {
    pub eye_height: f64,
    pub max_range: f64,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self {
            eye_height: 1.0,
            max_range: 12.0,
        }
    }
}

/// Parameters of the threat-field computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreatParams {
    /// Number of vantage cells kept from the belief.
    pub vantage_capacity: usize,
    /// Belief mass below which a cell is never a vantage.
    pub mass_floor: f64,
    /// Per-step discount along the planned trajectory.
    pub discount: f64,
    pub visibility: VisibilityParams,
}

impl Default for ThreatParams {
    fn default() -> Self {
        Self {
            vantage_capacity: 16,
            mass_floor: 1e-3,
            discount: 0.95,
            visibility: VisibilityParams::default(),
        }
    }
}
