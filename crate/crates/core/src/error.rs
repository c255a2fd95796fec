use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mode index {mode} out of range for a {modes}-mode space")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("cutoff {cutoff} too small: truncation deficit {deficit:.3e} exceeds {tolerance:.1e}")]
    CutoffTooSmall {
        cutoff: usize,
        deficit: f64,
        tolerance: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("state norm {norm_sq:.12} deviates from 1 beyond tolerance {tolerance:.1e}")]
    NormViolation { norm_sq: f64, tolerance: f64 },

    #[error("trace {trace:.12} deviates from 1 beyond tolerance {tolerance:.1e}")]
    TraceViolation { trace: f64, tolerance: f64 },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NonHermitian { deviation: f64 },

    #[error("negative probability {value:.3e} at outcome {outcome}")]
    NegativeProbability { outcome: usize, value: f64 },

    #[error("parameter `{0}` is not identifiable from this Fisher matrix")]
    NotIdentifiable(String),

    #[error("empty mode set")]
    EmptyModeSet,

    #[error("spectral decomposition failed: {0}")]
    Spectral(String),

    #[error("non-finite metric {value} at tau = {tau}, f = {fraction}")]
    NonFinite { value: f64, tau: f64, fraction: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("likelihood is flat over the search window; phase not identifiable")]
    FlatLikelihood,
}

pub type Result<T> = std::result::Result<T, Error>;
