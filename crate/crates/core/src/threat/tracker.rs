use serde::{Deserialize, Serialize};

use super::{build_vantage_set, merge_vantage_sets, Observation, ObservationModel, ThreatBelief, ThreatError, VantageSet};
use crate::maps::{Cell, GridSpec};

/// One categorical belief per tracked threat. Each detection is attributed to
/// the track that gives its cell the highest probability; the other tracks
/// treat that cell as unobserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatTracker {
    tracks: Vec<ThreatBelief>,
}

impl ThreatTracker {
    pub fn new(tracks: Vec<ThreatBelief>) -> Result<Self, ThreatError> {
        let Some(first) = tracks.first() else {
            return Err(ThreatError::BadWeights);
        };
        if tracks.iter().any(|t| t.spec() != first.spec()) {
            return Err(ThreatError::SpecMismatch);
        }
        Ok(Self { tracks })
    }

    /// One track per intel report, each seeded by [`ThreatBelief::with_intel`]
    /// on the report's cells (a single position or a patrol route). Without
    /// intel, a single uniform track.
    pub fn from_intel(spec: GridSpec, reports: &[Vec<Cell>], weight: f64, sigma_cells: f64) -> Result<Self, ThreatError> {
        if reports.is_empty() {
            return Self::new(vec![ThreatBelief::uniform(spec)]);
        }
        let tracks = reports
            .iter()
            .map(|cells| ThreatBelief::with_intel(spec, cells, weight, sigma_cells))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(tracks)
    }

    /// Diffuses every track, see [`ThreatBelief::diffuse`].
    pub fn predict(&mut self, rate: f64) {
        for t in &mut self.tracks {
            *t = t.diffuse(rate);
        }
    }

    pub fn tracks(&self) -> &[ThreatBelief] {
        &self.tracks
    }

    pub fn spec(&self) -> &GridSpec {
        self.tracks[0].spec()
    }

    /// Index of the track owning a detection in cell index `k`; ties go to the
    /// earliest track.
    fn owner(&self, k: usize) -> usize {
        let mut best = 0;
        for (t, track) in self.tracks.iter().enumerate().skip(1) {
            if track.probs()[k] > self.tracks[best].probs()[k] {
                best = t;
            }
        }
        best
    }

    /// Per-track likelihood vectors for one scan.
    pub fn likelihoods(&self, obs: &Observation, model: &ObservationModel) -> Vec<Vec<f64>> {
        let base = model.likelihood(obs);
        let owners: Vec<Option<usize>> = obs
            .detections
            .iter()
            .enumerate()
            .map(|(k, &d)| d.then(|| self.owner(k)))
            .collect();
        (0..self.tracks.len())
            .map(|t| {
                base.iter()
                    .zip(&owners)
                    .map(|(&l, o)| match o {
                        Some(owner) if *owner != t => 1.0,
                        _ => l,
                    })
                    .collect()
            })
            .collect()
    }

    /// Bayes-updates every track. A track whose evidence is degenerate keeps its
    /// prior; the number of such tracks is returned.
    pub fn update(&mut self, obs: &Observation, model: &ObservationModel) -> Result<usize, ThreatError> {
        let mut degenerate = 0;
        let likelihoods = self.likelihoods(obs, model);
        for (track, lik) in self.tracks.iter_mut().zip(likelihoods) {
            match track.update(&lik) {
                Ok(post) => *track = post,
                Err(ThreatError::DegenerateEvidence) => degenerate += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(degenerate)
    }

    /// Union of the per-track vantage sets, keeping each cell's highest probability.
    pub fn vantages(&self, capacity: usize, mass_floor: f64) -> Result<VantageSet, ThreatError> {
        let sets = self
            .tracks
            .iter()
            .map(|t| build_vantage_set(t, capacity, mass_floor))
            .collect::<Result<Vec<_>, _>>()?;
        merge_vantage_sets(&sets)
    }
}
