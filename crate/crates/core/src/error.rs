use thiserror::Error;

/// Failures raised by the state, operator and superoperator layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Fock dimension must be at least 2, got {0}")]
    InvalidDimension(usize),

    #[error("invalid photon distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not diagonal in the number basis (largest off-diagonal magnitude {max_off_diagonal:e})")]
    NotDiagonal { max_off_diagonal: f64 },

    #[error("operation is undefined on the vacuum state")]
    VacuumState,

    #[error("cannot subtract {n_events} photon(s): population with at least that many photons is {available:e}")]
    InsufficientPhotons { n_events: usize, available: f64 },

    #[error("adding {n_events} photon(s) would push population {edge_mass:e} past the truncation edge; increase the dimension")]
    TruncationOverflow { n_events: usize, edge_mass: f64 },

    #[error("invalid detector efficiency weights: {0}")]
    InvalidWeights(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("evidence vanishes: prior and likelihood have no overlap")]
    ZeroEvidence,

    #[error("no trajectory recorded a detection")]
    NoDetections,
}

pub type Result<T> = std::result::Result<T, Error>;
