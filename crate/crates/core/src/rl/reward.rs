use serde::{Deserialize, Serialize};

use crate::maps::{Cell, CoverMap, HeightMap, ThreatMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub cover: f64,
    pub threat: f64,
    pub goal: f64,
    pub collision: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            cover: 1.0,
            threat: 2.0,
            goal: 5.0,
            collision: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTerms {
    pub cover: f64,
    pub threat: f64,
    pub goal: f64,
    pub collision: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        total_reward(self)
    }
}

// Sorting first makes the sum independent of cell enumeration order.
fn sorted_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.into_iter().sum()
}

/// `weight * sum of cover over the traversed cells`.
pub fn reward_cover(cover: &CoverMap, traversed: &[Cell], weight: f64) -> f64 {
    weight * sorted_sum(traversed.iter().map(|c| cover.get(*c)).collect())
}

/// `-weight * sum of threat over the occupied cells`.
pub fn reward_threat(threat: &ThreatMap, occupied: &[Cell], weight: f64) -> f64 {
    -weight * sorted_sum(occupied.iter().map(|c| threat.get(*c)).collect())
}

/// `weight * (d_prev - d_next)`: positive when the robot gets closer to the goal.
pub fn reward_goal(d_prev: f64, d_next: f64, weight: f64) -> f64 {
    weight * (d_prev - d_next)
}

/// `-weight` if any traversed cell is taller than `h_max`, else 0.
pub fn reward_collision(height: &HeightMap, traversed: &[Cell], h_max: f64, weight: f64) -> f64 {
    if traversed.iter().any(|c| height.get(*c) > h_max) {
        -weight
    } else {
        0.0
    }
}

pub fn total_reward(terms: &RewardTerms) -> f64 {
    terms.cover + terms.threat + terms.goal + terms.collision
}
