use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    /// `(N, m, p)` violates `N ≥ 1`, `1 ≤ m < p`.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An argument is outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested radius is below what the grid can resolve.
    #[error("under-resolved radius {sigma} (grid spacing {h})")]
    UnderResolved { sigma: f64, h: f64 },

    /// The operation only applies to a particular regime.
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    /// Configuration text could not be parsed or validated.
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    /// The explicit scheme produced NaN/Inf or a large negative value.
    #[error("numerical instability at t = {t}: {message}")]
    Instability { t: f64, message: String },

    /// Quadrature, root finding or a fit failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Dichotomy outcomes are not monotone in c.
    #[error("non-monotone dichotomy outcomes: {0}")]
    NonMonotone(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    /// Usage / configuration errors, as opposed to numerical failures.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            LabError::InvalidParams(_)
                | LabError::Domain(_)
                | LabError::Config { .. }
                | LabError::RegimeMismatch(_)
                | LabError::UnderResolved { .. }
                | LabError::Io(_)
        )
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
