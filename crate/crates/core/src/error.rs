use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("quadrature did not converge: estimate {value:.6e}, residual {residual:.3e} ({context})")]
    Quadrature { value: f64, residual: f64, context: String },

    #[error("empty support: {0}")]
    EmptySupport(String),

    #[error("undefined thinning ratio: {0}")]
    UndefinedRatio(String),

    #[error("simulation diverged at t={time}: |state|={norm:.3e}")]
    Divergence { time: f64, norm: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("certificate unavailable: {0}")]
    CertificateUnavailable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
