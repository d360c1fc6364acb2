use serde::{Deserialize, Serialize};

pub const LINEAR_SPEEDS: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];
pub const ANGULAR_RATES: [f64; 5] = [-1.5, -0.75, 0.0, 0.75, 1.5];
pub const NUM_ACTIONS: usize = LINEAR_SPEEDS.len() * ANGULAR_RATES.len();
pub const V_MAX: f64 = 2.0;
pub const OMEGA_MAX: f64 = 1.5;

/// Index into the 5x5 grid of (linear, angular) velocity commands:
/// `index = v_idx * 5 + omega_idx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionIndex(u8);

impl ActionIndex {
    /// Stand still.
    pub const STOP: ActionIndex = ActionIndex(2);

    pub fn new(index: usize) -> Option<Self> {
        (index < NUM_ACTIONS).then_some(Self(index as u8))
    }

    pub fn from_parts(v_idx: usize, omega_idx: usize) -> Self {
        assert!(v_idx < 5 && omega_idx < 5, "velocity indices out of range");
        Self((v_idx * 5 + omega_idx) as u8)
    }

    pub fn all() -> impl Iterator<Item = ActionIndex> {
        (0..NUM_ACTIONS as u8).map(ActionIndex)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn v_idx(self) -> usize {
        self.index() / 5
    }

    pub fn omega_idx(self) -> usize {
        self.index() % 5
    }

    pub fn linear(self) -> f64 {
        LINEAR_SPEEDS[self.v_idx()]
    }

    pub fn angular(self) -> f64 {
        ANGULAR_RATES[self.omega_idx()]
    }

    pub fn velocities(self) -> (f64, f64) {
        (self.linear(), self.angular())
    }
}

/// Feasibility flags per action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionMask([bool; NUM_ACTIONS]);

impl ActionMask {
    pub fn all() -> Self {
        Self([true; NUM_ACTIONS])
    }

    pub fn none() -> Self {
        Self([false; NUM_ACTIONS])
    }

    pub fn allows(&self, a: ActionIndex) -> bool {
        self.0[a.index()]
    }

    pub fn set(&mut self, a: ActionIndex, allowed: bool) {
        self.0[a.index()] = allowed;
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn allowed(&self) -> impl Iterator<Item = ActionIndex> + '_ {
        ActionIndex::all().filter(|a| self.allows(*a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_round_trip() {
        for a in ActionIndex::all() {
            assert_eq!(ActionIndex::from_parts(a.v_idx(), a.omega_idx()), a);
            let (v, w) = a.velocities();
            assert!((0.0..=V_MAX).contains(&v) && w.abs() <= OMEGA_MAX);
        }
        assert_eq!(ActionIndex::STOP.velocities(), (0.0, 0.0));
        assert!(ActionIndex::new(25).is_none());
    }
}
