use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into "the caller asked for something invalid" and
/// "the numerics went wrong"; [`Error::is_invalid_input`] lets a driver map
/// them onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("resolution violation: {0}")]
    Resolution(String),

    #[error("eigensolver failed for zonal wavenumber m = {m}: {reason}")]
    EigenSolver { m: usize, reason: String },

    #[error("non-finite state at t = {t} (step {step})")]
    NonFinite { t: f64, step: u64 },

    #[error("stability violation: {0}")]
    Stability(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::Config(_) | Error::ShapeMismatch { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
