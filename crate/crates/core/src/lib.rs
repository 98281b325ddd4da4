//! Truncated Fock-space simulation of discrete (atom-stream) and continuous
//! (closed-system) photodetection.
//!
//! - [`fock`]: states, ladder operators and the number basis.
//! - [`superops`]: state-reduction maps for both detector models.
//! - [`bayes`]: brute-force Bayes posteriors used as a reference.
//! - [`statistics`]: moments, closed-form post-detection means, state factory.
//! - [`trajectory`]: Monte Carlo trials of both detection experiments.
//! - [`scenario`] and [`run`]: scenario files, pipelines, campaigns, reports.

pub mod bayes;
pub mod error;
pub mod fock;
pub mod run;
pub mod scenario;
pub mod statistics;
pub mod superops;
pub mod trajectory;

pub use error::{Error, Result};
pub use fock::{make_operator, DensityMatrix, FockDimension, FockOperator, OperatorKind, PhotonDistribution};
pub use statistics::{make_state, moments, MomentSummary, StateFamily};
pub use superops::{CouplingParams, DetectorEfficiency, ShiftDirection};
