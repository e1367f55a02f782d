use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{a}, {b}]: need a < b")]
    InvalidInterval { a: f64, b: f64 },

    #[error("t = {t} lies outside [{a}, {b}]")]
    Domain { t: f64, a: f64, b: f64 },

    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("interval mismatch in {op}")]
    IntervalMismatch { op: &'static str },

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("near-singular matrix function: smallest singular value {sigma:e} at t = {t}")]
    NearSingular { t: f64, sigma: f64 },

    #[error("residual {residual:e} above tolerance {tol:e} in {op}")]
    Residual {
        op: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("rank changes along the interval near t = {t}: {detail}")]
    ConstantRank { t: f64, detail: String },

    #[error("smooth SVD alignment failed: {0}")]
    Alignment(String),

    #[error("invalid block signature: {0}")]
    Signature(String),

    #[error("structure predicate failed: {0}")]
    Predicate(String),

    #[error("matrix is not nilpotent within tolerance")]
    NotNilpotent,

    #[error("invalid characteristics: {0}")]
    Characteristics(String),

    #[error("pipeline step {step} failed: {detail}")]
    Pipeline {
        step: usize,
        detail: String,
        kind: ErrorKind,
    },

    #[error("corpus integrity: {0}")]
    Integrity(String),

    #[error("parse error in {location}: {detail}")]
    Parse { location: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input, inconsistent dimensions or specs.
    Input,
    /// A structural predicate or a residual check failed.
    Verification,
    /// An adaptive method did not converge or hit a near-singular matrix.
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInterval { .. }
            | Error::Domain { .. }
            | Error::Dimension { .. }
            | Error::IntervalMismatch { .. }
            | Error::Signature(_)
            | Error::Characteristics(_)
            | Error::Parse { .. }
            | Error::Io(_) => ErrorKind::Input,
            Error::Residual { .. }
            | Error::Predicate(_)
            | Error::NotNilpotent
            | Error::Integrity(_) => ErrorKind::Verification,
            Error::NonConvergence(_)
            | Error::NearSingular { .. }
            | Error::ConstantRank { .. }
            | Error::Alignment(_) => ErrorKind::Numerical,
            Error::Pipeline { kind, .. } => *kind,
        }
    }

    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}
