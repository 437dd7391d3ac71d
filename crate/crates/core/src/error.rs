use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Every variant maps onto one of the machine-readable categories reported by
/// the command-line runner, see [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no photoline: {0}")]
    BelowThreshold(String),

    #[error("under-resolved grid: {0}")]
    UnderResolved(String),

    #[error("insufficient coverage: {0}")]
    Coverage(String),

    #[error("ill-conditioned peak overlap: {0}")]
    IllConditioned(String),

    #[error("coherence unmeasurable: {0}")]
    Suppressed(String),

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("malformed data file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) | Error::BelowThreshold(_) | Error::EmptyEnsemble => {
                "config-invalid"
            }
            Error::UnderResolved(_) => "under-resolved-grid",
            Error::Coverage(_) => "coverage",
            Error::IllConditioned(_) | Error::Suppressed(_) | Error::FitFailure(_) => {
                "fit-failure"
            }
            Error::Format(_) | Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
