use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("alpha = 1 requires beta = 0 (got beta = {beta})")]
    SingularCase { beta: f64 },
    #[error("quadrature failed for {what}: error estimate {achieved:e} exceeds {requested:e}")]
    QuadratureFailure {
        what: String,
        achieved: f64,
        requested: f64,
    },
    #[error("invalid distribution function: {0}")]
    InvalidCdf(String),
    #[error("tail perturbation is unbounded: {0}")]
    EpsilonUnbounded(String),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("root finding failed: {0}")]
    RootFindFailure(String),
    #[error("unsupported generator form: {0}")]
    UnsupportedForm(String),
    #[error("missing sup-norm of derivative order {0}")]
    MissingNorm(usize),
    #[error("parameters fall outside the hypotheses of the check: {0}")]
    CaseMismatch(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("inconsistent derivative evaluator: {0}")]
    InconsistentDerivative(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse failure classes, shared by the CLI exit codes and the C error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    InvalidInput,
    Numerical,
    Hypothesis,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::OutOfRange(_)
            | Error::SingularCase { .. }
            | Error::InvalidCdf(_)
            | Error::EpsilonUnbounded(_)
            | Error::InvalidDensity(_)
            | Error::UnsupportedForm(_)
            | Error::MissingNorm(_)
            | Error::SizeMismatch { .. }
            | Error::InvalidConfig(_)
            | Error::InconsistentDerivative(_)
            | Error::Json(_) => ErrorClass::InvalidInput,
            Error::QuadratureFailure { .. } | Error::RootFindFailure(_) | Error::DegenerateFit(_) => {
                ErrorClass::Numerical
            }
            Error::CaseMismatch(_) | Error::HypothesisViolation(_) => ErrorClass::Hypothesis,
            Error::Io(_) | Error::Csv(_) => ErrorClass::Io,
        }
    }

    pub(crate) fn quad(what: impl Into<String>, achieved: f64, requested: f64) -> Self {
        Error::QuadratureFailure {
            what: what.into(),
            achieved,
            requested,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
