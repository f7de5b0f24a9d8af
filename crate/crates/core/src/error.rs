use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degree {degree} exceeds the configured maximum {max}")]
    DegreeTooLarge { degree: usize, max: usize },

    #[error("quadrature order {order} outside 1..={max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("argument {value} outside the domain: {what}")]
    DomainError { value: f64, what: &'static str },

    #[error("dimension mismatch: need at least {needed}, got {got}")]
    DimensionMismatch { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no explicit weight for multi-index {0}")]
    MissingExplicitEntry(String),

    #[error("lq norm does not converge: {0}")]
    NonConvergent(String),

    #[error("index set would exceed the cap of {cap} entries")]
    SetTooLarge { cap: usize },

    #[error("inverse-CDF tabulation failed for degree {degree}: {reason}")]
    TabulationFailure { degree: usize, reason: String },

    #[error("full Gram matrix is ill-conditioned (lambda_min = {lambda_min:.3e} < 1/2)")]
    IllConditionedInput { lambda_min: f64 },

    #[error("subsampling target {target} is too small (need at least {min})")]
    TargetTooSmall { target: usize, min: usize },

    #[error("subsampling could not reach the spectral bounds: {0}")]
    SubsamplingFailed(String),

    #[error("design is rank deficient (lambda_min = {lambda_min:.3e}, lambda_max = {lambda_max:.3e})")]
    RankDeficient { lambda_min: f64, lambda_max: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("coefficient field is not uniformly elliptic: a = {value:.3e} at x = {x}")]
    EllipticityViolation { value: f64, x: f64 },

    #[error("singular finite element system")]
    SingularSystem,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Failures caused by the numerics rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergent(_)
                | Error::TabulationFailure { .. }
                | Error::IllConditionedInput { .. }
                | Error::SubsamplingFailed(_)
                | Error::RankDeficient { .. }
                | Error::EllipticityViolation { .. }
                | Error::SingularSystem
                | Error::LinearAlgebra(_)
                | Error::SetTooLarge { .. }
        )
    }
}
