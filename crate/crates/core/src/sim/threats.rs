use serde::{Deserialize, Serialize};

use crate::maps::{Cell, HeightMap};
use crate::threat::{line_of_sight, VisibilityParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Motion {
    Static,
    /// Loops through `waypoints`, moving one cell every `period` steps.
    Patrol { waypoints: Vec<Cell>, period: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatAgent {
    pub position: Cell,
    pub visibility: VisibilityParams,
    pub motion: Motion,
    #[serde(default)]
    pub next_waypoint: usize,
}

impl ThreatAgent {
    pub fn fixed(position: Cell, visibility: VisibilityParams) -> Self {
        Self {
            position,
            visibility,
            motion: Motion::Static,
            next_waypoint: 0,
        }
    }

    pub fn sees(&self, height: &HeightMap, cell: Cell) -> bool {
        line_of_sight(height, self.position, cell, &self.visibility)
    }

    /// Distinct cells the agent occupies over one full patrol loop, in visiting
    /// order from its current position.
    pub fn route(&self) -> Vec<Cell> {
        let mut cells = vec![self.position];
        if let Motion::Patrol { waypoints, .. } = &self.motion {
            let mut probe = self.clone();
            probe.motion = Motion::Patrol {
                waypoints: waypoints.clone(),
                period: 1,
            };
            let mut seen = std::collections::HashSet::new();
            let mut step = 0;
            while seen.insert((probe.position, probe.next_waypoint)) {
                probe.advance(step);
                step += 1;
                if !cells.contains(&probe.position) {
                    cells.push(probe.position);
                }
            }
        }
        cells
    }

    /// Advances a patrolling agent after simulation step `step` (0-based).
    pub fn advance(&mut self, step: usize) {
        let Motion::Patrol { waypoints, period } = &self.motion else {
            return;
        };
        if waypoints.is_empty() || !(step + 1).is_multiple_of((*period).max(1) as usize) {
            return;
        }
        let target = waypoints[self.next_waypoint % waypoints.len()];
        if self.position == target {
            self.next_waypoint = (self.next_waypoint + 1) % waypoints.len();
            return;
        }
        let toward = |a: usize, b: usize| match a.cmp(&b) {
            std::cmp::Ordering::Less => a + 1,
            std::cmp::Ordering::Greater => a - 1,
            std::cmp::Ordering::Equal => a,
        };
        self.position = Cell::new(toward(self.position.i, target.i), toward(self.position.j, target.j));
    }
}

/// True when any agent has line of sight to the robot's cell and the robot is
/// not concealed, i.e. its cell is lower than `concealment_height`.
pub fn detect(robot_cell: Option<Cell>, threats: &[ThreatAgent], height: &HeightMap, concealment_height: f64) -> bool {
    match robot_cell {
        Some(c) => height.get(c) < concealment_height && threats.iter().any(|t| t.sees(height, c)),
        None => false,
    }
}
