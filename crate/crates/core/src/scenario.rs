//! Scenario files: a TOML description of an initial state, a detector
//! model, a list of reductions, and Monte Carlo settings.
//!
//! ```toml
//! model = "discrete"
//! dim = 128
//! seed = 7
//! trials = 1000000
//!
//! [initial_state]
//! family = "thermal"
//! mean = 2.0
//!
//! [[operations]]
//! op = "subtract"
//! n = 1
//!
//! [trajectory]
//! excitation = { kind = "constant", q = 0.5 }
//! ```
//!
//! Unknown keys anywhere in the file are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::fock::FockDimension;
use crate::statistics::{make_state, StateFamily, TruncatedState};
use crate::superops::{CouplingParams, DetectorEfficiency, ShiftDirection};
use crate::trajectory::{DetectorModel, ExcitationProbability, DEFAULT_MAX_ATOMS};

/// Generated initial states must lose less than this to truncation.
pub const MAX_TAIL_MASS: f64 = 1e-10;
/// Default counting window for continuous campaigns, in units of `1/lambda`.
pub const DEFAULT_WINDOW: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario at `{path}`: {message}")]
    Validation { path: String, message: String },
    #[error("step {step} ({operation}): {source}")]
    Step {
        step: usize,
        operation: String,
        #[source]
        source: Error,
    },
    #[error("campaign failed: {0}")]
    Campaign(#[source] Error),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl ScenarioError {
    fn at(path: impl Into<String>, message: impl ToString) -> Self {
        Self::Validation {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weight {
    pub n: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Operation {
    Subtract { n: usize },
    Add { n: usize },
    OneCount,
    NoCount { tau: f64 },
    Phase { phi: f64 },
    Imperfect { direction: ShiftDirection, weights: Vec<Weight> },
}

impl Operation {
    pub fn label(&self) -> String {
        match self {
            Self::Subtract { n } => format!("subtract {n}"),
            Self::Add { n } => format!("add {n}"),
            Self::OneCount => "one-count".into(),
            Self::NoCount { tau } => format!("no-count tau={tau}"),
            Self::Phase { phi } => format!("phase phi={phi}"),
            Self::Imperfect { direction, .. } => match direction {
                ShiftDirection::Subtract => "imperfect subtract".into(),
                ShiftDirection::Add => "imperfect add".into(),
            },
        }
    }

    fn allowed_in(&self, model: DetectorModel) -> bool {
        matches!(
            (self, model),
            (Self::Add { .. } | Self::Phase { .. }, _)
                | (Self::Subtract { .. } | Self::Imperfect { .. }, DetectorModel::Discrete)
                | (Self::OneCount | Self::NoCount { .. }, DetectorModel::Continuous)
        )
    }

    pub fn efficiency(&self) -> Option<Result<DetectorEfficiency, Error>> {
        match self {
            Self::Imperfect { direction, weights } => {
                Some(DetectorEfficiency::new(weights.iter().map(|w| (w.n, w.alpha)), *direction))
            }
            _ => None,
        }
    }
}

/// Monte Carlo settings; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    #[serde(default = "default_excitation")]
    pub excitation: ExcitationProbability,
    #[serde(default = "default_max_atoms")]
    pub max_atoms: u64,
    #[serde(default = "default_detections")]
    pub detections: usize,
    /// Counting window for the continuous detector; defaults to `1e-3 / lambda`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
}

fn default_excitation() -> ExcitationProbability {
    ExcitationProbability::Constant { q: 0.5 }
}

fn default_max_atoms() -> u64 {
    DEFAULT_MAX_ATOMS
}

fn default_detections() -> usize {
    1
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            excitation: default_excitation(),
            max_atoms: DEFAULT_MAX_ATOMS,
            detections: 1,
            t_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: DetectorModel,
    pub dim: usize,
    pub initial_state: StateFamily,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub operations: Vec<Operation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trajectory: TrajectorySpec,
    #[serde(default)]
    pub output: OutputSpec,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        toml::to_string(self).map_err(|e| ScenarioError::Output(e.to_string()))
    }

    pub fn fock_dim(&self) -> Result<FockDimension, ScenarioError> {
        FockDimension::new(self.dim).map_err(|e| ScenarioError::at("dim", e))
    }

    /// Generates the initial distribution, enforcing the tail-mass bound.
    pub fn initial(&self) -> Result<TruncatedState, ScenarioError> {
        let state = make_state(&self.initial_state, self.fock_dim()?).map_err(|e| ScenarioError::at("initial_state", e))?;
        if state.tail_mass >= MAX_TAIL_MASS {
            return Err(ScenarioError::at(
                "dim",
                format!(
                    "truncation discards {:e} of the initial state (limit {MAX_TAIL_MASS:e}); increase dim",
                    state.tail_mass
                ),
            ));
        }
        Ok(state)
    }

    fn coupling_or_err(&self, path: &str) -> Result<CouplingParams, ScenarioError> {
        let c = self
            .coupling
            .ok_or_else(|| ScenarioError::at(path, "the continuous model needs a [coupling] table"))?;
        c.validate().map_err(|e| ScenarioError::at("coupling", e))?;
        Ok(c)
    }

    /// Counting window for continuous campaigns.
    pub fn window(&self) -> Result<f64, ScenarioError> {
        let c = self.coupling_or_err("coupling")?;
        let t = self.trajectory.t_max.unwrap_or(DEFAULT_WINDOW / c.lambda);
        if !(t > 0.0) {
            return Err(ScenarioError::at("trajectory.t_max", format!("must be positive, got {t}")));
        }
        Ok(t)
    }

    /// Checks everything a pipeline run needs.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let initial = self.initial()?;
        if self.model == DetectorModel::Continuous {
            self.coupling_or_err("coupling")?;
        }
        for (i, op) in self.operations.iter().enumerate() {
            let path = format!("operations[{i}]");
            if !op.allowed_in(self.model) {
                return Err(ScenarioError::at(
                    format!("{path}.op"),
                    format!("`{}` is not part of the {:?} detector model", op.label(), self.model),
                ));
            }
            match op {
                Operation::Subtract { n: 0 } | Operation::Add { n: 0 } => {
                    return Err(ScenarioError::at(format!("{path}.n"), "photon count must be positive"));
                }
                Operation::NoCount { tau } if !(tau.is_finite() && *tau >= 0.0) => {
                    return Err(ScenarioError::at(format!("{path}.tau"), "must be finite and >= 0"));
                }
                Operation::Phase { phi } if !phi.is_finite() => {
                    return Err(ScenarioError::at(format!("{path}.phi"), "must be finite"));
                }
                _ => {}
            }
            if let Some(Err(e)) = op.efficiency() {
                return Err(ScenarioError::at(format!("{path}.weights"), e));
            }
        }
        if self.trials == Some(0) {
            return Err(ScenarioError::at("trials", "must be at least 1"));
        }
        let t = &self.trajectory;
        if t.max_atoms == 0 {
            return Err(ScenarioError::at("trajectory.max_atoms", "must be positive"));
        }
        if t.detections == 0 {
            return Err(ScenarioError::at("trajectory.detections", "must be positive"));
        }
        match self.model {
            DetectorModel::Discrete => {
                let top = initial.distribution.probabilities().iter().rposition(|&x| x > 0.0).unwrap_or(0);
                t.excitation
                    .validate(top)
                    .map_err(|e| ScenarioError::at("trajectory.excitation", e))?;
            }
            DetectorModel::Continuous => {
                if t.detections != 1 {
                    return Err(ScenarioError::at(
                        "trajectory.detections",
                        "continuous trials stop at the first count",
                    ));
                }
                self.window()?;
            }
        }
        Ok(())
    }
}
