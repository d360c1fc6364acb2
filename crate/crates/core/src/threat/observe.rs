use rand::Rng;
use serde::{Deserialize, Serialize};

use super::VisibilityParams;
use crate::maps::{Cell, HeightMap};

/// Robot-side threat sensor. A cell is scanned when it is within `sensor_range`
/// and in line of sight at `sensor_height`. A threat in a scanned cell is detected
/// with `detection_prob`; every other scanned cell raises a false alarm with
/// `false_alarm_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationModel {
    pub detection_prob: f64,
    pub false_alarm_prob: f64,
    pub sensor_range: f64,
    pub sensor_height: f64,
}

impl Default for ObservationModel {
    fn default() -> Self {
        Self {
            detection_prob: 0.9,
            false_alarm_prob: 0.02,
            sensor_range: 15.0,
            sensor_height: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub scanned: Vec<bool>,
    pub detections: Vec<bool>,
}

impl Observation {
    pub fn detected_cells(&self, spec: &crate::maps::GridSpec) -> Vec<Cell> {
        self.detections
            .iter()
            .enumerate()
            .filter(|(_, d)| **d)
            .map(|(k, _)| spec.cell_at(k))
            .collect()
    }
}

impl ObservationModel {
    fn visibility(&self) -> VisibilityParams {
        VisibilityParams {
            eye_height: self.sensor_height,
            max_range: self.sensor_range,
        }
    }

    pub fn scanned_cells(&self, height: &HeightMap, robot: Cell) -> Vec<bool> {
        super::visible_from(height, robot, &self.visibility())
    }

    /// Samples one scan given the true threat cells.
    pub fn observe<R: Rng + ?Sized>(
        &self,
        height: &HeightMap,
        robot: Cell,
        threats: &[Cell],
        rng: &mut R,
    ) -> Observation {
        let spec = height.spec();
        let scanned = self.scanned_cells(height, robot);
        let mut occupied = vec![false; spec.len()];
        for t in threats {
            occupied[spec.index(*t)] = true;
        }
        let detections = scanned
            .iter()
            .zip(&occupied)
            .map(|(&s, &o)| {
                s && if o {
                    rng.random_bool(self.detection_prob)
                } else {
                    rng.random_bool(self.false_alarm_prob)
                }
            })
            .collect();
        Observation { scanned, detections }
    }

    /// Per-cell likelihood of the observation under "the threat is in this cell".
    ///
    /// Detections elsewhere are treated as false alarms, so each scanned cell
    /// contributes the ratio of its own term; unscanned cells carry no evidence.
    pub fn likelihood(&self, obs: &Observation) -> Vec<f64> {
        obs.scanned
            .iter()
            .zip(&obs.detections)
            .map(|(&s, &d)| match (s, d) {
                (false, _) => 1.0,
                (true, true) => self.detection_prob / self.false_alarm_prob.max(f64::MIN_POSITIVE),
                (true, false) => (1.0 - self.detection_prob) / (1.0 - self.false_alarm_prob),
            })
            .collect()
    }
}
