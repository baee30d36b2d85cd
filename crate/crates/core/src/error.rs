use crate::numerics::{OdeError, RootError};

/// Errors raised by the model, solver and simulation layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("divergent integral: {0}")]
    Divergence(String),
    #[error("moment explosion: |psi| exceeded the ceiling at t = {t}")]
    BlowUp { t: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("price {price} is outside the no-arbitrage band: {bound}")]
    OutOfBand { price: f64, bound: &'static str },
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("missing input: {0}")]
    Missing(&'static str),
    #[error("not supported: {0}")]
    NotSupported(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<OdeError> for Error {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::Blowup { t } => Error::BlowUp { t },
            OdeError::Domain { t } => Error::Domain(format!("solution left Re(psi) <= 0 at t = {t}")),
            other => Error::Numerical(other.to_string()),
        }
    }
}

impl From<RootError> for Error {
    fn from(e: RootError) -> Self {
        Error::Numerical(e.to_string())
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
