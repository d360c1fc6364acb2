use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{ThreatBelief, ThreatError};
use crate::maps::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vantage {
    pub cell: Cell,
    pub probability: f64,
}

/// The `capacity` most probable threat cells, most probable first, ties broken
/// by row-major index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VantageSet {
    capacity: usize,
    entries: Vec<Vantage>,
}

impl VantageSet {
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[Vantage] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vantage> {
        self.entries.iter()
    }

    /// Belief mass covered by the set.
    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|v| v.probability).sum()
    }
}

struct Ranked {
    p: f64,
    index: usize,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.p
            .total_cmp(&other.p)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Keeps the `capacity` highest-probability cells whose mass is at least `mass_floor`.
pub fn build_vantage_set(
    belief: &ThreatBelief,
    capacity: usize,
    mass_floor: f64,
) -> Result<VantageSet, ThreatError> {
    if capacity == 0 {
        return Err(ThreatError::ZeroCapacity);
    }
    let spec = belief.spec();
    let candidates: Vec<Ranked> = belief
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, p)| **p >= mass_floor && **p > 0.0)
        .map(|(index, &p)| Ranked { p, index })
        .collect();
    let mut heap = BinaryHeap::from(candidates);
    let mut entries = Vec::with_capacity(capacity.min(heap.len()));
    while entries.len() < capacity {
        let Some(top) = heap.pop() else { break };
        entries.push(Vantage {
            cell: spec.cell_at(top.index),
            probability: top.p,
        });
    }
    Ok(VantageSet { capacity, entries })
}

/// Union of vantage sets: each cell keeps its highest probability, ordered as
/// in [`build_vantage_set`]. The capacity is the sum of the inputs' capacities.
pub fn merge_vantage_sets(sets: &[VantageSet]) -> Result<VantageSet, ThreatError> {
    let capacity: usize = sets.iter().map(|s| s.capacity).sum();
    if capacity == 0 {
        return Err(ThreatError::ZeroCapacity);
    }
    let mut best: std::collections::BTreeMap<(usize, usize), f64> = std::collections::BTreeMap::new();
    for v in sets.iter().flat_map(|s| s.iter()) {
        let slot = best.entry((v.cell.j, v.cell.i)).or_insert(0.0);
        *slot = slot.max(v.probability);
    }
    let mut entries: Vec<Vantage> = best
        .into_iter()
        .map(|((j, i), probability)| Vantage {
            cell: Cell::new(i, j),
            probability,
        })
        .collect();
    // stable sort keeps row-major order among equal probabilities
    entries.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    Ok(VantageSet { capacity, entries })
}
