//! State-reduction superoperators for photodetection.
//!
//! Two families live here. The continuous (closed-system) detector is built
//! from the annihilation operator: a count applies `a rho a^dag` and a quiet
//! interval applies `exp(-lambda n tau / 2)` on both sides. The discrete
//! atom-stream detector is built from the bare lowering operator `E-`, so a
//! detection removes one photon with a weight that does not depend on `n`.
//! The discrete maps are only meaningful for states diagonal in the number
//! basis and refuse anything else with [`Error::NotDiagonal`].
//!
//! Each map has a matrix form acting on [`DensityMatrix`] and a closed form
//! acting on [`PhotonDistribution`] in [`closed_form`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockOperator, OperatorKind, PhotonDistribution, C64, PROB_TOL};

/// Normalization denominators at or below this are treated as zero.
pub const VACUUM_THRESHOLD: f64 = 1e-12;
/// Off-diagonal magnitude tolerated by the discrete-model guard.
pub const DIAGONAL_TOL: f64 = 1e-10;

/// Detector-field coupling rate `lambda` and no-count duration `tau`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingParams {
    pub lambda: f64,
    #[serde(default)]
    pub tau: f64,
}

impl CouplingParams {
    pub fn new(lambda: f64, tau: f64) -> Result<Self> {
        let params = Self { lambda, tau };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be finite and > 0, got {}", self.lambda)));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be finite and >= 0, got {}", self.tau)));
        }
        Ok(())
    }

    pub fn with_tau(self, tau: f64) -> Result<Self> {
        Self::new(self.lambda, tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftDirection {
    Subtract,
    Add,
}

/// Distribution `alpha_N` over how many photons a noisy detector record
/// actually shifted. `N = 0` is allowed and means no shift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorEfficiency {
    weights: Vec<(usize, f64)>,
    direction: ShiftDirection,
}

impl DetectorEfficiency {
    pub fn new(weights: impl IntoIterator<Item = (usize, f64)>, direction: ShiftDirection) -> Result<Self> {
        let mut weights: Vec<(usize, f64)> = weights.into_iter().collect();
        if weights.is_empty() {
            return Err(Error::InvalidWeights("no weights given".into()));
        }
        weights.sort_by_key(|&(n, _)| n);
        if weights.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidWeights("duplicate shift count".into()));
        }
        if let Some(&(n, a)) = weights.iter().find(|(_, a)| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidWeights(format!("alpha_{n} = {a} is not a nonnegative number")));
        }
        let total: f64 = weights.iter().map(|&(_, a)| a).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { weights, direction })
    }

    /// A detector that always shifts exactly `n` photons.
    pub fn exact(n: usize, direction: ShiftDirection) -> Self {
        Self {
            weights: vec![(n, 1.0)],
            direction,
        }
    }

    pub fn weights(&self) -> &[(usize, f64)] {
        &self.weights
    }

    pub fn direction(&self) -> ShiftDirection {
        self.direction
    }

    /// The most probable shift count (smallest on ties).
    pub fn center(&self) -> usize {
        let mut best = self.weights[0];
        for &w in &self.weights[1..] {
            if w.1 > best.1 {
                best = w;
            }
        }
        best.0
    }

    fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().copied().filter(|&(_, a)| a > 0.0)
    }
}

/// Numerator and normalization of an N-photon subtraction, before dividing.
#[derive(Debug, Clone, PartialEq)]
pub struct UnnormalizedReduction {
    pub numerator: DMatrix<C64>,
    pub normalization: f64,
}

impl UnnormalizedReduction {
    pub fn numerator_trace(&self) -> f64 {
        self.numerator.diagonal().iter().map(|z| z.re).sum()
    }
}

fn discrete_guard(rho: &DensityMatrix) -> Result<()> {
    let worst = rho.max_off_diagonal();
    if worst > DIAGONAL_TOL {
        return Err(Error::NotDiagonal { max_off_diagonal: worst });
    }
    Ok(())
}

fn scaled(m: DMatrix<C64>, denominator: f64) -> DMatrix<C64> {
    m.map(|z| z / denominator)
}

/// One-count reduction of the continuous detector: `a rho a^dag / Tr(rho a^dag a)`.
pub fn one_count_j(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let dim = rho.dim();
    let number = FockOperator::make(OperatorKind::Number, dim);
    let mean = rho.expectation(&number)?;
    if mean <= VACUUM_THRESHOLD {
        return Err(Error::VacuumState);
    }
    let a = FockOperator::make(OperatorKind::Annihilate, dim);
    let numerator = a.sandwich(rho.matrix(), &a.adjoint());
    DensityMatrix::from_reduced(scaled(numerator, mean))
}

/// No-count evolution over `params.tau`:
/// `exp(-lambda n tau/2) rho exp(-lambda n tau/2)`, renormalized by its own trace.
pub fn no_count_s(rho: &DensityMatrix, params: &CouplingParams) -> Result<DensityMatrix> {
    params.validate()?;
    let rate = params.lambda * params.tau;
    // The lowest occupied level is factored out of the damping so the
    // numerator cannot underflow; the common factor cancels on normalizing.
    let floor = rho.populations().iter().position(|&x| x > 0.0).unwrap_or(0);
    let damping = FockOperator::number_function(rho.dim(), |n| {
        if n < floor {
            0.0
        } else {
            (-0.5 * rate * (n - floor) as f64).exp()
        }
    });
    let numerator = damping.sandwich(rho.matrix(), &damping);
    let norm: f64 = numerator.diagonal().iter().map(|z| z.re).sum();
    if !(norm > 0.0) {
        return Err(Error::InvalidDensityMatrix("no-count normalization vanished".into()));
    }
    DensityMatrix::from_reduced(scaled(numerator, norm))
}

/// One excited atom detected: `E- rho E+ / (1 - <0|rho|0>)`.
pub fn subtract_one_b(rho: &DensityMatrix) -> Result<DensityMatrix> {
    discrete_guard(rho)?;
    let occupied = 1.0 - rho.matrix()[(0, 0)].re;
    if occupied <= VACUUM_THRESHOLD {
        return Err(Error::VacuumState);
    }
    let lower = FockOperator::make(OperatorKind::LowerSG, rho.dim());
    let numerator = lower.sandwich(rho.matrix(), &lower.adjoint());
    DensityMatrix::from_reduced(scaled(numerator, occupied))
}

/// `E-^N rho E+^N` together with `Tr(rho E+^N E-^N)`.
pub fn subtract_n_parts(rho: &DensityMatrix, n_events: usize) -> Result<UnnormalizedReduction> {
    if n_events == 0 {
        return Err(Error::InvalidParameter("photon count must be positive".into()));
    }
    discrete_guard(rho)?;
    let lower_n = FockOperator::make(OperatorKind::LowerSG, rho.dim()).pow(n_events as u32);
    let raise_n = lower_n.adjoint();
    let projector = raise_n.compose(&lower_n)?;
    let normalization = rho.trace_with(&projector)?.re;
    Ok(UnnormalizedReduction {
        numerator: lower_n.sandwich(rho.matrix(), &raise_n),
        normalization,
    })
}

/// N excited atoms detected: `E-^N rho E+^N / Tr(rho E+^N E-^N)`.
pub fn subtract_n(rho: &DensityMatrix, n_events: usize) -> Result<DensityMatrix> {
    let parts = subtract_n_parts(rho, n_events)?;
    if parts.normalization <= VACUUM_THRESHOLD {
        return Err(Error::InsufficientPhotons {
            n_events,
            available: parts.normalization,
        });
    }
    DensityMatrix::from_reduced(scaled(parts.numerator, parts.normalization))
}

/// N de-excited atoms detected: `E+^N rho E-^N`, with no normalization.
///
/// Fails if more than `1e-10` of the population sits within `N` levels of
/// the truncation edge, since `E+` would discard it.
pub fn add_n(rho: &DensityMatrix, n_events: usize) -> Result<DensityMatrix> {
    if n_events == 0 {
        return Err(Error::InvalidParameter("photon count must be positive".into()));
    }
    let d = rho.dim().get();
    let edge_mass: f64 = rho.populations()[d.saturating_sub(n_events)..].iter().sum();
    if edge_mass > PROB_TOL {
        return Err(Error::TruncationOverflow { n_events, edge_mass });
    }
    let raise_n = FockOperator::make(OperatorKind::RaiseSG, rho.dim()).pow(n_events as u32);
    DensityMatrix::from_reduced(raise_n.sandwich(rho.matrix(), &raise_n.adjoint()))
}

/// `exp(i phi n) rho exp(-i phi n)`.
pub fn phase_shift(rho: &DensityMatrix, phi: f64) -> Result<DensityMatrix> {
    let d = rho.dim().get();
    let m = rho.matrix();
    let out = DMatrix::from_fn(d, d, |r, c| m[(r, c)] * C64::from_polar(1.0, phi * (r as f64 - c as f64)));
    DensityMatrix::from_reduced(out)
}

/// Mixture `sum_N alpha_N B^N rho` for a noisy detector record.
///
/// The per-N terms are each trace one, so the mixture is not renormalized;
/// a trace defect is reported as an error.
pub fn imperfect_detection(rho: &DensityMatrix, eff: &DetectorEfficiency) -> Result<DensityMatrix> {
    if eff.direction == ShiftDirection::Subtract {
        discrete_guard(rho)?;
    }
    let d = rho.dim().get();
    let mut acc = DMatrix::<C64>::zeros(d, d);
    for (n, alpha) in eff.support() {
        let term = match (n, eff.direction) {
            (0, _) => rho.clone(),
            (n, ShiftDirection::Subtract) => subtract_n(rho, n)?,
            (n, ShiftDirection::Add) => add_n(rho, n)?,
        };
        acc += term.matrix().map(|z| z * alpha);
    }
    DensityMatrix::from_reduced(acc)
}

/// The same reductions written directly on `p(n)`.
pub mod closed_form {
    use super::*;

    /// `p(n+1) / (1 - p(0))`.
    pub fn subtract_one(p: &PhotonDistribution) -> Result<PhotonDistribution> {
        subtract_n(p, 1)
    }

    /// `p(n+N) / sum_{m >= N} p(m)`.
    pub fn subtract_n(p: &PhotonDistribution, n_events: usize) -> Result<PhotonDistribution> {
        if n_events == 0 {
            return Err(Error::InvalidParameter("photon count must be positive".into()));
        }
        let available = p.mass_at_least(n_events);
        if available <= VACUUM_THRESHOLD {
            return Err(if n_events == 1 {
                Error::VacuumState
            } else {
                Error::InsufficientPhotons { n_events, available }
            });
        }
        let d = p.len();
        let out = (0..d).map(|n| p.get(n + n_events) / available).collect();
        PhotonDistribution::new(out)
    }

    /// `(n+1) p(n+1) / <n>`.
    pub fn one_count(p: &PhotonDistribution) -> Result<PhotonDistribution> {
        let mean = p.mean();
        if mean <= VACUUM_THRESHOLD {
            return Err(Error::VacuumState);
        }
        let out = (0..p.len()).map(|n| (n + 1) as f64 * p.get(n + 1) / mean).collect();
        PhotonDistribution::new(out)
    }

    /// `p(n) exp(-n lambda tau)`, renormalized.
    pub fn no_count(p: &PhotonDistribution, params: &CouplingParams) -> Result<PhotonDistribution> {
        params.validate()?;
        let rate = params.lambda * params.tau;
        let floor = p.probabilities().iter().position(|&x| x > 0.0).unwrap_or(0);
        let weights = p
            .probabilities()
            .iter()
            .enumerate()
            .map(|(n, &x)| if n < floor { 0.0 } else { x * (-rate * (n - floor) as f64).exp() })
            .collect();
        PhotonDistribution::from_weights(weights)
    }

    /// `p_out(n + N) = p(n)`.
    pub fn add_n(p: &PhotonDistribution, n_events: usize) -> Result<PhotonDistribution> {
        if n_events == 0 {
            return Err(Error::InvalidParameter("photon count must be positive".into()));
        }
        let d = p.len();
        let edge_mass: f64 = p.probabilities()[d.saturating_sub(n_events)..].iter().sum();
        if edge_mass > PROB_TOL {
            return Err(Error::TruncationOverflow { n_events, edge_mass });
        }
        let out = (0..d)
            .map(|n| if n >= n_events { p.get(n - n_events) } else { 0.0 })
            .collect();
        PhotonDistribution::new(out)
    }

    pub fn imperfect(p: &PhotonDistribution, eff: &DetectorEfficiency) -> Result<PhotonDistribution> {
        let mut acc = vec![0.0; p.len()];
        for (n, alpha) in eff.support() {
            let term = match (n, eff.direction()) {
                (0, _) => p.clone(),
                (n, ShiftDirection::Subtract) => subtract_n(p, n).map_err(|e| match e {
                    Error::VacuumState => Error::InsufficientPhotons {
                        n_events: n,
                        available: p.mass_at_least(n),
                    },
                    e => e,
                })?,
                (n, ShiftDirection::Add) => add_n(p, n)?,
            };
            acc.iter_mut().zip(term.probabilities()).for_each(|(a, t)| *a += alpha * t);
        }
        PhotonDistribution::new(acc)
    }
}
