use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{what}: value {value} outside domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("class {0} has no points")]
    EmptyClass(&'static str),

    #[error("hypothesis class is empty")]
    EmptyHypothesisClass,

    #[error("kernel is not positive semidefinite (value {0:e})")]
    IndefiniteKernel(f64),

    #[error("link is not canonical for loss {0}; use a sampled hypothesis class instead")]
    NonCanonicalLink(String),

    #[error("transport problem infeasible: {0}")]
    Infeasible(String),

    #[error("training diverged after {0} iterations")]
    Divergence(usize),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures that stem from the numbers rather than from the
    /// configuration or input files.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::IndefiniteKernel(_)
                | Error::Infeasible(_)
                | Error::Divergence(_)
                | Error::Numeric(_)
        )
    }
}
