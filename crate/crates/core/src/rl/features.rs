use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::maps::{CoverMap, GridSpec, HeightMap, ThreatMap};

pub const COVER_BUCKETS: usize = 5;
pub const THREAT_BUCKETS: usize = 5;
pub const DISTANCE_BUCKETS: usize = 8;
pub const BEARING_BUCKETS: usize = 8;
pub const NUM_STATES: usize = COVER_BUCKETS * THREAT_BUCKETS * 2 * DISTANCE_BUCKETS * BEARING_BUCKETS;

/// Discretized robot state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateFeatures {
    pub cover_bucket: u8,
    pub threat_bucket: u8,
    pub height_block: bool,
    pub goal_dist_bucket: u8,
    pub goal_bearing_bucket: u8,
}

impl StateFeatures {
    pub fn index(&self) -> usize {
        let c = self.cover_bucket as usize;
        let t = self.threat_bucket as usize;
        let b = self.height_block as usize;
        let d = self.goal_dist_bucket as usize;
        let g = self.goal_bearing_bucket as usize;
        (((c * THREAT_BUCKETS + t) * 2 + b) * DISTANCE_BUCKETS + d) * BEARING_BUCKETS + g
    }

    pub fn from_index(index: usize) -> Option<Self> {
        if index >= NUM_STATES {
            return None;
        }
        let g = index % BEARING_BUCKETS;
        let rest = index / BEARING_BUCKETS;
        let d = rest % DISTANCE_BUCKETS;
        let rest = rest / DISTANCE_BUCKETS;
        let b = rest % 2;
        let rest = rest / 2;
        let t = rest % THREAT_BUCKETS;
        let c = rest / THREAT_BUCKETS;
        Some(Self {
            cover_bucket: c as u8,
            threat_bucket: t as u8,
            height_block: b == 1,
            goal_dist_bucket: d as u8,
            goal_bearing_bucket: g as u8,
        })
    }

    pub fn to_bytes(&self) -> [u8; 5] {
        [
            self.cover_bucket,
            self.threat_bucket,
            self.height_block as u8,
            self.goal_dist_bucket,
            self.goal_bearing_bucket,
        ]
    }

    pub fn from_bytes(b: [u8; 5]) -> Option<Self> {
        let f = Self {
            cover_bucket: b[0],
            threat_bucket: b[1],
            height_block: b[2] == 1,
            goal_dist_bucket: b[3],
            goal_bearing_bucket: b[4],
        };
        let valid = (b[0] as usize) < COVER_BUCKETS
            && (b[1] as usize) < THREAT_BUCKETS
            && b[2] <= 1
            && (b[3] as usize) < DISTANCE_BUCKETS
            && (b[4] as usize) < BEARING_BUCKETS;
        valid.then_some(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureParams {
    /// Distance ahead of the robot at which the local window is centered.
    pub lookahead: f64,
    /// Half-width of the square local window, in cells.
    pub window_radius: usize,
    pub cover_edges: [f64; COVER_BUCKETS - 1],
    pub threat_edges: [f64; THREAT_BUCKETS - 1],
    pub distance_edges: [f64; DISTANCE_BUCKETS - 1],
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            lookahead: 1.0,
            window_radius: 1,
            cover_edges: [0.1, 0.3, 0.5, 0.7],
            threat_edges: [0.005, 0.02, 0.05, 0.15],
            distance_edges: [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
        }
    }
}

/// Number of edges at or below `x`.
pub fn bucket(x: f64, edges: &[f64]) -> u8 {
    edges.iter().filter(|e| x >= **e).count() as u8
}

/// Bearing sector of a relative angle: 8 sectors of 45 degrees, sector 0
/// centered on straight ahead, counting counter-clockwise.
pub fn bearing_bucket(relative: f64) -> u8 {
    let sector = (relative / (PI / 4.0)).round() as i64;
    sector.rem_euclid(BEARING_BUCKETS as i64) as u8
}

/// Maps and pose needed to featurize one state.
#[derive(Debug, Clone, Copy)]
pub struct FeatureInput<'a> {
    pub cover: &'a CoverMap,
    pub threat: &'a ThreatMap,
    pub height: &'a HeightMap,
    pub pose: (f64, f64, f64),
    pub goal: (f64, f64),
    /// Point the robot should head for next (a waypoint on its plan, or the goal).
    pub heading_target: (f64, f64),
}

fn window_cells(spec: &GridSpec, center: (f64, f64), radius: usize) -> Vec<crate::maps::Cell> {
    let ci = ((center.0 - spec.origin_x) / spec.cell_size).floor() as i64;
    let cj = ((center.1 - spec.origin_y) / spec.cell_size).floor() as i64;
    let r = radius as i64;
    let mut out = Vec::new();
    for dj in -r..=r {
        for di in -r..=r {
            if let Some(c) = spec.checked_cell(ci + di, cj + dj) {
                out.push(c);
            }
        }
    }
    out
}

pub fn extract_features(input: &FeatureInput<'_>, params: &FeatureParams, h_max: f64) -> StateFeatures {
    let (x, y, theta) = input.pose;
    let spec = input.cover.spec();
    let ahead = (x + params.lookahead * theta.cos(), y + params.lookahead * theta.sin());
    let window = window_cells(spec, ahead, params.window_radius);
    let (cover, threat) = if window.is_empty() {
        (0.0, 0.0)
    } else {
        let n = window.len() as f64;
        (
            window.iter().map(|c| input.cover.get(*c)).sum::<f64>() / n,
            window.iter().map(|c| input.threat.get(*c)).sum::<f64>() / n,
        )
    };
    // leaving the grid counts as blocked
    let full = (2 * params.window_radius + 1).pow(2);
    let height_block = window.len() < full || window.iter().any(|c| input.height.get(*c) > h_max);
    let dist = (input.goal.0 - x).hypot(input.goal.1 - y);
    let target = input.heading_target;
    let rel = (target.1 - y).atan2(target.0 - x) - theta;
    StateFeatures {
        cover_bucket: bucket(cover, &params.cover_edges),
        threat_bucket: bucket(threat, &params.threat_edges),
        height_block,
        goal_dist_bucket: bucket(dist, &params.distance_edges),
        goal_bearing_bucket: bearing_bucket(rel),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::ScalarGrid;

    #[test]
    fn index_round_trip() {
        for k in 0..NUM_STATES {
            let f = StateFeatures::from_index(k).unwrap();
            assert_eq!(f.index(), k);
            assert_eq!(StateFeatures::from_bytes(f.to_bytes()), Some(f));
        }
        assert!(StateFeatures::from_index(NUM_STATES).is_none());
    }

    #[test]
    fn buckets() {
        let e = FeatureParams::default().distance_edges;
        assert_eq!(bucket(0.0, &e), 0);
        assert_eq!(bucket(0.5, &e), 1);
        assert_eq!(bucket(100.0, &e), 7);
        assert_eq!(bearing_bucket(0.1), 0);
        assert_eq!(bearing_bucket(PI / 2.0), 2);
        assert_eq!(bearing_bucket(-PI / 4.0), 7);
        assert_eq!(bearing_bucket(PI), 4);
        assert_eq!(bearing_bucket(-PI), 4);
    }

    #[test]
    fn features_in_open_field() {
        let spec = GridSpec::new(20, 20, 0.5, 0.0, 0.0).unwrap();
        let cover = CoverMap::new(ScalarGrid::filled(spec, 0.6)).unwrap();
        let threat = ThreatMap::zeros(spec);
        let height = HeightMap::flat(spec, 0.0);
        let input = FeatureInput {
            cover: &cover,
            threat: &threat,
            height: &height,
            pose: (5.0, 5.0, 0.0),
            goal: (5.0, 8.0),
            heading_target: (5.0, 8.0),
        };
        let f = extract_features(&input, &FeatureParams::default(), 0.3);
        assert_eq!(f.cover_bucket, 3);
        assert_eq!(f.threat_bucket, 0);
        assert!(!f.height_block);
        assert_eq!(f.goal_dist_bucket, 3);
        assert_eq!(f.goal_bearing_bucket, 2);
    }
}
