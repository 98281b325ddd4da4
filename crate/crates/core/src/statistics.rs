//! Photon-number moments, closed-form post-detection means, and the
//! standard diagonal state families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockDimension, PhotonDistribution};
use crate::superops::VACUUM_THRESHOLD;

/// Mean, variance and vacuum probability of a photon-number distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub vacuum_prob: f64,
}

pub fn moments(p: &PhotonDistribution) -> MomentSummary {
    let (mut first, mut second) = (0.0, 0.0);
    for (n, &x) in p.probabilities().iter().enumerate() {
        let n = n as f64;
        first += n * x;
        second += n * n * x;
    }
    MomentSummary {
        mean: first,
        variance: second - first * first,
        vacuum_prob: p.vacuum_probability(),
    }
}

/// Mean photon number after one excited atom is detected:
/// `<n>/(1 - p(0)) - 1`.
pub fn predict_discrete_mean(s: &MomentSummary) -> Result<f64> {
    let occupied = 1.0 - s.vacuum_prob;
    if occupied <= VACUUM_THRESHOLD {
        return Err(Error::VacuumState);
    }
    Ok(s.mean / occupied - 1.0)
}

/// Mean photon number right after a one-count event:
/// `<n> - 1 + (dn)^2/<n>`.
pub fn predict_continuous_mean(s: &MomentSummary) -> Result<f64> {
    if s.mean <= VACUUM_THRESHOLD {
        return Err(Error::VacuumState);
    }
    Ok(s.mean - 1.0 + s.variance / s.mean)
}

/// Families of diagonal states used to seed pipelines and campaigns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateFamily {
    Fock { n: usize },
    Thermal { mean: f64 },
    /// Poisson photon statistics (the diagonal of a coherent state).
    Poisson { mean: f64 },
    Custom { p: Vec<f64> },
}

/// A generated distribution together with the probability mass the
/// untruncated family places on `n >= d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedState {
    pub distribution: PhotonDistribution,
    pub tail_mass: f64,
}

/// Builds `family` on `dim` levels, renormalized over the retained basis.
pub fn make_state(family: &StateFamily, dim: FockDimension) -> Result<TruncatedState> {
    let d = dim.get();
    match family {
        StateFamily::Fock { n } => Ok(TruncatedState {
            distribution: PhotonDistribution::fock(*n, dim)?,
            tail_mass: 0.0,
        }),
        StateFamily::Thermal { mean } => {
            check_mean(*mean)?;
            if *mean == 0.0 {
                return Ok(TruncatedState {
                    distribution: PhotonDistribution::fock(0, dim)?,
                    tail_mass: 0.0,
                });
            }
            // p(n) = r^n (1 - r) with r = mean / (1 + mean)
            let ratio = mean / (1.0 + mean);
            let weights: Vec<f64> = (0..d).map(|n| ratio.powi(n as i32) * (1.0 - ratio)).collect();
            Ok(TruncatedState {
                distribution: PhotonDistribution::from_weights(weights)?,
                tail_mass: ratio.powi(d as i32),
            })
        }
        StateFamily::Poisson { mean } => {
            check_mean(*mean)?;
            if *mean == 0.0 {
                return Ok(TruncatedState {
                    distribution: PhotonDistribution::fock(0, dim)?,
                    tail_mass: 0.0,
                });
            }
            let log_mean = mean.ln();
            let mut log_fact = 0.0;
            let mut log_term = |n: usize| {
                if n > 0 {
                    log_fact += (n as f64).ln();
                }
                n as f64 * log_mean - mean - log_fact
            };
            let weights: Vec<f64> = (0..d).map(|n| log_term(n).exp()).collect();
            // Sum the tail term by term until it stops contributing.
            let mut tail = 0.0;
            let mut n = d;
            loop {
                let term = log_term(n).exp();
                tail += term;
                if (n as f64) > *mean && term <= tail * 1e-17 {
                    break;
                }
                n += 1;
            }
            Ok(TruncatedState {
                distribution: PhotonDistribution::from_weights(weights)?,
                tail_mass: tail,
            })
        }
        StateFamily::Custom { p } => {
            if p.len() > d && p[d..].iter().any(|&x| x != 0.0) {
                return Err(Error::OutOfRange(format!(
                    "custom distribution has population beyond dimension {d}"
                )));
            }
            let mut padded = p.clone();
            padded.resize(d, 0.0);
            Ok(TruncatedState {
                distribution: PhotonDistribution::new(padded)?,
                tail_mass: 0.0,
            })
        }
    }
}

fn check_mean(mean: f64) -> Result<()> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(Error::OutOfRange(format!("mean photon number must be finite and >= 0, got {mean}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(d: usize) -> FockDimension {
        FockDimension::new(d).unwrap()
    }

    #[test]
    fn fock_moments() {
        let s = moments(&PhotonDistribution::fock(3, dim(5)).unwrap());
        assert_eq!((s.mean, s.variance, s.vacuum_prob), (3.0, 0.0, 0.0));
        assert_eq!(predict_discrete_mean(&s).unwrap(), 2.0);
        assert_eq!(predict_continuous_mean(&s).unwrap(), 2.0);
    }

    #[test]
    fn two_level_moments_and_discrete_prediction() {
        let s = moments(&PhotonDistribution::new(vec![0.5, 0.5]).unwrap());
        assert_eq!(s.mean, 0.5);
        assert_eq!(s.variance, 0.25);
        assert_eq!(s.vacuum_prob, 0.5);
        assert_eq!(predict_discrete_mean(&s).unwrap(), 0.0);
    }

    #[test]
    fn predictions_reject_vacuum() {
        let s = moments(&PhotonDistribution::fock(0, dim(3)).unwrap());
        assert_eq!(predict_discrete_mean(&s), Err(Error::VacuumState));
        assert_eq!(predict_continuous_mean(&s), Err(Error::VacuumState));
    }

    #[test]
    fn thermal_and_poisson_moments() {
        // Direct summation of the infinite series, independent of make_state.
        let mut thermal_mean = 0.0;
        let mut thermal_second = 0.0;
        for n in 0..2000 {
            let p = (2.0f64 / 3.0).powi(n) / 3.0;
            thermal_mean += n as f64 * p;
            thermal_second += (n * n) as f64 * p;
        }
        let thermal_var = thermal_second - thermal_mean * thermal_mean;
        assert!((thermal_mean - 2.0).abs() < 1e-12 && (thermal_var - 6.0).abs() < 1e-10);

        let t = make_state(&StateFamily::Thermal { mean: 2.0 }, dim(128)).unwrap();
        assert!(t.tail_mass < 1e-12);
        let s = moments(&t.distribution);
        assert!((s.mean - thermal_mean).abs() < 1e-6);
        assert!((s.variance - thermal_var).abs() < 1e-6);
        assert!((s.vacuum_prob - 1.0 / 3.0).abs() < 1e-12);
        assert!((predict_discrete_mean(&s).unwrap() - 2.0).abs() < 1e-9);
        assert!((predict_continuous_mean(&s).unwrap() - 4.0).abs() < 1e-9);

        let p = make_state(&StateFamily::Poisson { mean: 2.0 }, dim(128)).unwrap();
        let s = moments(&p.distribution);
        assert!((s.mean - 2.0).abs() < 1e-12);
        assert!((s.variance - 2.0).abs() < 1e-12);
        assert!((predict_continuous_mean(&s).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn thermal_mean_two_over_sixty_four_levels() {
        let t = make_state(&StateFamily::Thermal { mean: 2.0 }, dim(64)).unwrap();
        assert!((moments(&t.distribution).mean - 2.0).abs() < 1e-6);
    }

    #[test]
    fn thermal_one_is_renormalized_geometric() {
        let t = make_state(&StateFamily::Thermal { mean: 1.0 }, dim(16)).unwrap();
        let total: f64 = (0..16).map(|n| 0.5f64.powi(n)).sum();
        for n in 0..16 {
            let want = 0.5f64.powi(n as i32) / total;
            assert!((t.distribution.get(n) - want).abs() < 1e-15);
        }
        assert!((t.tail_mass - 0.5f64.powi(16)).abs() < 1e-18);
    }

    #[test]
    fn generator_edge_cases() {
        let f = make_state(&StateFamily::Fock { n: 2 }, dim(4)).unwrap();
        assert_eq!(f.distribution.probabilities(), &[0.0, 0.0, 1.0, 0.0]);
        assert!(make_state(&StateFamily::Fock { n: 4 }, dim(4)).is_err());
        for d in [2, 7, 50] {
            let v = make_state(&StateFamily::Thermal { mean: 0.0 }, dim(d)).unwrap();
            assert_eq!(v.distribution, PhotonDistribution::fock(0, dim(d)).unwrap());
        }
        assert!(make_state(&StateFamily::Thermal { mean: -1.0 }, dim(4)).is_err());
        assert!(make_state(&StateFamily::Poisson { mean: f64::NAN }, dim(4)).is_err());
    }

    #[test]
    fn poisson_one_at_thirty_two_levels() {
        let s = make_state(&StateFamily::Poisson { mean: 1.0 }, dim(32)).unwrap();
        assert!(s.tail_mass < 1e-20);
        let mut fact = 1.0;
        for n in 0..32 {
            if n > 0 {
                fact *= n as f64;
            }
            let want = (-1f64).exp() / fact;
            assert!((s.distribution.get(n) - want).abs() < 1e-15, "n={n}");
        }
    }
}
