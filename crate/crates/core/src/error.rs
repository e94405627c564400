use thiserror::Error;

/// Errors raised by the tomography library.
///
/// `Domain` covers parameters outside their physical range (efficiencies,
/// transmittances, variances violating the uncertainty relation).
/// `Truncation` means a state leaked past the Fock cutoff beyond the caller's
/// tolerance, and `Numerical` covers quadrature / normalization failures that
/// indicate the computation itself went bad.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("truncation failure: leaked mass {leaked:.3e} exceeds tolerance {tolerance:.3e}")]
    Truncation { leaked: f64, tolerance: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("empty input: {0}")]
    EmptyInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
