use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Arguments have the wrong length, sum or layout.
    #[error("input shape: {0}")]
    InputShape(String),

    /// Arguments are outside the mathematical domain of the operation.
    #[error("domain: {0}")]
    Domain(String),

    /// The requested computation exceeds a fixed work cap.
    #[error("feasibility: {0}")]
    Feasibility(String),

    #[error("numeric: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::InputShape(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn feasibility(msg: impl Into<String>) -> Self {
        Error::Feasibility(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
