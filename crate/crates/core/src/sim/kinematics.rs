use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::maps::{Cell, GridSpec, HeightMap};
use crate::raster::{segment_cells, SegmentCells};
use crate::rl::{ActionIndex, ActionMask, OMEGA_MAX, V_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub time: f64,
}

impl RobotState {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
            time: 0.0,
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn pose(&self) -> (f64, f64, f64) {
        (self.x, self.y, self.heading)
    }

    pub fn distance_to(&self, p: (f64, f64)) -> f64 {
        (p.0 - self.x).hypot(p.1 - self.y)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Unicycle step: translate along the current heading, then turn.
pub fn step(robot: &RobotState, command: (f64, f64), dt: f64) -> RobotState {
    let (v, omega) = command;
    RobotState {
        x: robot.x + v * robot.heading.cos() * dt,
        y: robot.y + v * robot.heading.sin() * dt,
        heading: wrap_angle(robot.heading + omega * dt),
        time: robot.time + dt,
    }
}

/// Slows the nominal command under threat and clutter:
/// `v' = v (1 - 0.7 t)(1 - 0.5 d)`, `w' = w (1 - 0.5 t)`, clamped to the action ranges.
pub fn modulate_velocity(nominal: (f64, f64), threat_level: f64, obstacle_density: f64) -> (f64, f64) {
    let t = threat_level.clamp(0.0, 1.0);
    let d = obstacle_density.clamp(0.0, 1.0);
    let v = nominal.0 * (1.0 - 0.7 * t) * (1.0 - 0.5 * d);
    let w = nominal.1 * (1.0 - 0.5 * t);
    (v.clamp(0.0, V_MAX), w.clamp(-OMEGA_MAX, OMEGA_MAX))
}

/// Fraction of in-grid 8-neighbors taller than `h_max`.
pub fn obstacle_density(height: &HeightMap, cell: Cell, h_max: f64) -> f64 {
    let spec = height.spec();
    let (mut n, mut blocked) = (0usize, 0usize);
    for c in spec.neighbors8(cell) {
        n += 1;
        if height.get(c) > h_max {
            blocked += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        blocked as f64 / n as f64
    }
}

/// Cells swept by the straight segment of one step.
pub fn swept_cells(spec: &GridSpec, from: &RobotState, to: &RobotState) -> SegmentCells {
    segment_cells(spec, from.position(), to.position())
}

/// Whether a command keeps the swept cells in-grid and traversable.
pub fn command_feasible(robot: &RobotState, command: (f64, f64), height: &HeightMap, h_max: f64, dt: f64) -> bool {
    let next = step(robot, command, dt);
    let swept = swept_cells(height.spec(), robot, &next);
    !swept.leaves_grid && !swept.cells.is_empty() && swept.cells.iter().all(|c| height.get(*c) <= h_max)
}

/// Forward-simulated action mask. Standing still is always allowed.
pub fn feasible_actions(robot: &RobotState, height: &HeightMap, h_max: f64, dt: f64) -> ActionMask {
    let mut mask = ActionMask::none();
    for a in ActionIndex::all() {
        let ok = a == ActionIndex::STOP || command_feasible(robot, a.velocities(), height, h_max, dt);
        mask.set(a, ok);
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::ScalarGrid;

    #[test]
    fn step_cases() {
        let r = RobotState::new(1.0, 2.0, 0.3);
        let s = step(&r, (0.0, 0.0), 0.2);
        assert_eq!((s.x, s.y, s.heading), (r.x, r.y, r.heading));
        assert!((s.time - 0.2).abs() < 1e-15);
        let s = step(&RobotState::new(0.0, 0.0, 0.0), (1.0, 0.0), 1.0);
        assert_eq!(s.x, 1.0);
        let s = step(&RobotState::new(0.0, 0.0, 0.0), (0.0, PI), 2.0);
        assert!(wrap_angle(s.heading).abs() < 1e-12);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn modulation() {
        assert_eq!(modulate_velocity((2.0, 1.5), 0.0, 0.0), (2.0, 1.5));
        let (v, w) = modulate_velocity((2.0, 1.5), 1.0, 0.0);
        assert!((v - 0.6).abs() < 1e-12 && (w - 0.75).abs() < 1e-12);
    }

    #[test]
    fn wall_masks_fast_forward() {
        let spec = GridSpec::new(10, 10, 0.5, 0.0, 0.0).unwrap();
        let h = HeightMap::new(ScalarGrid::from_fn(spec, |c| if c.i == 5 { 2.0 } else { 0.0 })).unwrap();
        let open = HeightMap::flat(spec, 0.0);
        let r = RobotState::new(2.3, 2.5, 0.0);
        assert_eq!(feasible_actions(&r, &open, 0.3, 0.2).count(), 25);
        let mask = feasible_actions(&r, &h, 0.3, 0.2);
        for a in ActionIndex::all().filter(|a| a.v_idx() == 4) {
            assert!(!mask.allows(a));
        }
        assert!(mask.allows(ActionIndex::STOP));
    }
}
