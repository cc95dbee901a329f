use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("subsystem index {index} out of range for layout with {len} factors")]
    SubsystemOutOfRange { index: usize, len: usize },

    #[error("vector length {0} is not a perfect square")]
    NotPerfectSquare(usize),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid device parameters: {0}")]
    InvalidDevice(String),

    #[error("unknown mode index {0}")]
    UnknownMode(usize),

    #[error("non-physical coherence: T2 = {t2:.3e} s exceeds 2*T1 = {two_t1:.3e} s")]
    NonPhysicalCoherence { t2: f64, two_t1: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("step size {dt:.3e} s exceeds guard {limit:.3e} s")]
    StepGuard { dt: f64, limit: f64 },

    #[error("target phase {0} outside (-2pi, 0) U (0, 2pi)")]
    PhaseDomain(f64),

    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    #[error("invalid measurement axis: {0}")]
    InvalidAxis(String),

    #[error("truncation {truncation} too small for {needed} levels")]
    TruncationTooSmall { truncation: usize, needed: usize },

    #[error("compilation error: {0}")]
    Compile(String),

    #[error("tomography error: {0}")]
    Tomography(String),

    #[error("ill-conditioned input set (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("inconsistent readout probabilities (violation {0:.3e})")]
    InconsistentReadout(f64),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("degenerate mixture fit: {0}")]
    DegenerateFit(String),

    #[error("no peaks detected")]
    NoPeaks,

    #[error("unsupported argument: {0}")]
    Unsupported(String),

    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;
