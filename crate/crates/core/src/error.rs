use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("resource limit exceeded: {what} needs {requested}, cap is {cap}")]
    ResourceLimit {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("zero weight at point {index}; the point cannot be lifted")]
    DegenerateWeight { index: usize },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("numerical degeneracy at basis index {index}: {detail}")]
    NumericalDegeneracy { index: usize, detail: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("direction {0:?} lies on the boundary of the simplex")]
    BoundaryDirection(Vec<f64>),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("truncation insufficient: |log Z(T) - log Z(2T)| = {change:e} exceeds {tol:e}")]
    TruncationInsufficient { change: f64, tol: f64 },
}

impl Error {
    /// Stable machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Overflow(_) => "overflow",
            Error::ResourceLimit { .. } => "resource-limit",
            Error::DegenerateWeight { .. } => "degenerate-weight",
            Error::Degenerate(_) => "degenerate-problem",
            Error::NumericalDegeneracy { .. } => "numerical-degeneracy",
            Error::Unsupported(_) => "unsupported",
            Error::BoundaryDirection(_) => "boundary-direction",
            Error::GridTooCoarse(_) => "grid-too-coarse",
            Error::TruncationInsufficient { .. } => "truncation-insufficient",
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
