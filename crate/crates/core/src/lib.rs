//! Covert navigation on grid maps built from point clouds.
//!
//! The pipeline runs in this order:
//!
//! 1. [`worldgen`] procedurally builds a synthetic environment and samples a point cloud from it.
//! 2. [`perception`] segments the cloud with Euclidean clustering and flags cover objects.
//! 3. [`maps`] projects the cloud into cover, height and goal grids.
//! 4. [`threat`] maintains a Bayesian threat belief and turns it into a cover-aware threat field.
//! 5. [`rl`] scores transitions, synthesizes an offline dataset and trains a tabular
//!    conservative Q-function.
//! 6. [`sim`] closes the loop with unicycle kinematics, threat agents, baselines and metrics.

pub mod maps;
pub mod perception;
pub mod raster;
pub mod rl;
pub mod sim;
pub mod threat;
pub mod worldgen;

pub use maps::{Cell, CoverMap, GoalMap, GridSpec, HeightMap, ScalarGrid, ThreatMap};
