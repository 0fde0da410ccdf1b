use alloc::string::String;

/// Errors raised by the analysis and synthesis routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains NaN or infinite entries")]
    NonFinite,

    #[error("ragged matrix rows")]
    Ragged,

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    Asymmetric(f64),

    #[error("iteration did not converge: {0}")]
    NoConvergence(&'static str),

    #[error("matrix is singular or ill-conditioned (condition estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("evaluation point is at or near a pole")]
    NearPole,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feedback loop is ill-posed (algebraic loop)")]
    IllPosed,

    #[error("system matrix pencil is degenerate (normal rank deficient)")]
    DegeneratePencil,

    #[error("no finite tau exists: N is indefinite on the kernel of M")]
    FinslerHypothesis,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}

pub(crate) fn param_err(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
