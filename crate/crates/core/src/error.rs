use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a mathematical function.
    #[error("domain error: {0}")]
    Domain(String),

    /// An inconsistent model, grid or run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A precondition on the inputs of an estimator is not met.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{0} diverges")]
    Divergent(String),

    #[error("solution blow-up at step {step}")]
    BlowUp { step: usize },

    #[error("degenerate sample, zero spread")]
    DegenerateSample,

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
