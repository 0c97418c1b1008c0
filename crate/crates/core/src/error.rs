use thiserror::Error;

/// Errors raised by the observer toolkit.
///
/// Numeric diagnostics are carried as `f64` regardless of the scalar type
/// the computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("system is not physically realizable: {0}")]
    NotRealizable(String),

    #[error("coupling matrix inversion failed: {0}")]
    Inversion(String),

    #[error("equation has no unique solution: {0}")]
    NoUniqueSolution(String),

    #[error("matrix is not Hurwitz (largest eigenvalue real part {max_real_part:e})")]
    NotHurwitz { max_real_part: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("infeasible synthesis: {0}")]
    Infeasible(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("integration produced non-finite values at t = {t}")]
    Divergence { t: f64 },

    #[error("invalid Gaussian state: {0}")]
    InvalidState(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}
