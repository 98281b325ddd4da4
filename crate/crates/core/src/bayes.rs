//! Brute-force Bayes updates over the photon number.
//!
//! This module deliberately shares nothing with [`crate::superops`]: it
//! weighs the prior by a detection likelihood, normalizes by the evidence,
//! and only then moves every photon number down by one. Tests use it as the
//! reference for the operator-based reductions.

use crate::error::{Error, Result};
use crate::fock::{FockDimension, PhotonDistribution};

const EVIDENCE_FLOOR: f64 = 1e-12;

/// `P(detect | n photons)` tabulated over the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalModel {
    likelihood: Vec<f64>,
}

impl ConditionalModel {
    pub fn new(likelihood: Vec<f64>) -> Result<Self> {
        FockDimension::new(likelihood.len())?;
        if let Some((n, l)) = likelihood
            .iter()
            .enumerate()
            .find(|(_, l)| !(0.0..=1.0).contains(*l))
        {
            return Err(Error::InvalidParameter(format!("likelihood({n}) = {l} is outside [0, 1]")));
        }
        Ok(Self { likelihood })
    }

    /// Atom-stream detector: any nonvacuum field eventually excites an atom.
    pub fn discrete(dim: FockDimension) -> Self {
        let likelihood = (0..dim.get()).map(|n| if n == 0 { 0.0 } else { 1.0 }).collect();
        Self { likelihood }
    }

    /// Closed-system detector: detection probability in a short interval is
    /// proportional to `n`. The rate constant cancels in the posterior, so
    /// the table is scaled to `n / (d - 1)`.
    pub fn continuous(dim: FockDimension) -> Self {
        let top = dim.max_photons() as f64;
        let likelihood = (0..dim.get()).map(|n| n as f64 / top).collect();
        Self { likelihood }
    }

    pub fn likelihood(&self) -> &[f64] {
        &self.likelihood
    }

    /// Multiplies every entry by `c`, rejecting results outside `[0, 1]`.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        Self::new(self.likelihood.iter().map(|l| l * c).collect())
    }
}

/// `p(n) L(n) / sum_m p(m) L(m)`: the distribution of the photon number
/// held before the detection, given that the detection happened.
pub fn posterior(prior: &PhotonDistribution, model: &ConditionalModel) -> Result<PhotonDistribution> {
    if prior.len() != model.likelihood.len() {
        return Err(Error::DimensionMismatch {
            expected: prior.len(),
            found: model.likelihood.len(),
        });
    }
    let joint: Vec<f64> = prior
        .probabilities()
        .iter()
        .zip(&model.likelihood)
        .map(|(p, l)| p * l)
        .collect();
    let evidence: f64 = joint.iter().sum();
    if evidence <= EVIDENCE_FLOOR {
        return Err(Error::ZeroEvidence);
    }
    PhotonDistribution::new(joint.into_iter().map(|x| x / evidence).collect())
}

/// Removes one photon from every outcome: `q(n) = p(n + 1)`.
fn downshift(p: &PhotonDistribution) -> Result<PhotonDistribution> {
    let src = p.probabilities();
    let mut out = vec![0.0; src.len()];
    out[..src.len() - 1].copy_from_slice(&src[1..]);
    PhotonDistribution::new(out)
}

/// Posterior after one excited atom, then the photon it carried away.
pub fn discrete_posterior(prior: &PhotonDistribution) -> Result<PhotonDistribution> {
    downshift(&posterior(prior, &ConditionalModel::discrete(prior.dim()))?)
}

/// Posterior after one count of the closed-system detector, then the
/// absorbed photon.
pub fn continuous_posterior(prior: &PhotonDistribution) -> Result<PhotonDistribution> {
    downshift(&posterior(prior, &ConditionalModel::continuous(prior.dim()))?)
}
