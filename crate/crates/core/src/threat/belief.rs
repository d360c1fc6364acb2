use serde::{Deserialize, Serialize};

use super::ThreatError;
use crate::maps::{Cell, GridSpec};

/// Categorical distribution of a threat's location over grid cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatBelief {
    spec: GridSpec,
    probs: Vec<f64>,
}

impl ThreatBelief {
    pub fn uniform(spec: GridSpec) -> Self {
        let n = spec.len();
        Self {
            spec,
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// Normalizes arbitrary non-negative weights into a belief.
    pub fn from_weights(spec: GridSpec, weights: Vec<f64>) -> Result<Self, ThreatError> {
        if weights.len() != spec.len() {
            return Err(ThreatError::LengthMismatch {
                expected: spec.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(ThreatError::BadWeights);
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(ThreatError::BadWeights);
        }
        Ok(Self {
            spec,
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Prior from intelligence about threat locations: `weight` of the mass is
    /// split evenly between discrete Gaussian blobs (std-dev `sigma_cells`) around
    /// each `known` cell, the rest is spread uniformly. `sigma_cells == 0` puts each
    /// blob on its cell alone.
    pub fn with_intel(
        spec: GridSpec,
        known: &[Cell],
        weight: f64,
        sigma_cells: f64,
    ) -> Result<Self, ThreatError> {
        let n = spec.len() as f64;
        let weight = if known.is_empty() { 0.0 } else { weight.clamp(0.0, 1.0) };
        let mut w = vec![(1.0 - weight) / n; spec.len()];
        for &k in known {
            let blob: Vec<f64> = spec
                .cells()
                .map(|c| {
                    if sigma_cells <= 0.0 {
                        if c == k {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        let d2 = (c.i as f64 - k.i as f64).powi(2) + (c.j as f64 - k.j as f64).powi(2);
                        (-d2 / (2.0 * sigma_cells * sigma_cells)).exp()
                    }
                })
                .collect();
            let total: f64 = blob.iter().sum();
            for (slot, b) in w.iter_mut().zip(blob) {
                *slot += weight / known.len() as f64 * b / total;
            }
        }
        Self::from_weights(spec, w)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, cell: Cell) -> f64 {
        self.probs[self.spec.index(cell)]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Motion prediction: a share `rate` of every cell's mass is spread evenly
    /// over its in-grid 3x3 neighborhood (itself included). Total mass is kept.
    pub fn diffuse(&self, rate: f64) -> Self {
        let rate = rate.clamp(0.0, 1.0);
        if rate == 0.0 {
            return self.clone();
        }
        let spec = self.spec;
        let mut out: Vec<f64> = self.probs.iter().map(|p| p * (1.0 - rate)).collect();
        for c in spec.cells() {
            let p = self.probs[spec.index(c)];
            if p == 0.0 {
                continue;
            }
            let hood: Vec<Cell> = std::iter::once(c).chain(spec.neighbors8(c)).collect();
            let share = p * rate / hood.len() as f64;
            for n in hood {
                out[spec.index(n)] += share;
            }
        }
        let total: f64 = out.iter().sum();
        Self {
            spec,
            probs: out.into_iter().map(|x| x / total).collect(),
        }
    }

    /// Bayes rule with a per-cell likelihood `p(o | threat in cell)`.
    pub fn update(&self, likelihood: &[f64]) -> Result<Self, ThreatError> {
        belief_update(self, likelihood)
    }
}

/// Posterior `prior * likelihood / sum(prior * likelihood)`. On zero evidence mass
/// the prior is untouched and [`ThreatError::DegenerateEvidence`] is returned.
pub fn belief_update(prior: &ThreatBelief, likelihood: &[f64]) -> Result<ThreatBelief, ThreatError> {
    if likelihood.len() != prior.probs.len() {
        return Err(ThreatError::LengthMismatch {
            expected: prior.probs.len(),
            found: likelihood.len(),
        });
    }
    if let Some((index, &value)) = likelihood
        .iter()
        .enumerate()
        .find(|(_, l)| !(l.is_finite() && **l >= 0.0))
    {
        return Err(ThreatError::BadLikelihood { index, value });
    }
    let numerators: Vec<f64> = prior.probs.iter().zip(likelihood).map(|(p, l)| p * l).collect();
    let evidence: f64 = numerators.iter().sum();
    if !(evidence > 0.0 && evidence.is_finite()) {
        return Err(ThreatError::DegenerateEvidence);
    }
    Ok(ThreatBelief {
        spec: prior.spec,
        probs: numerators.into_iter().map(|x| x / evidence).collect(),
    })
}
