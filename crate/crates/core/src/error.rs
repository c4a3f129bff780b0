use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input: bad shape, length mismatch, zero measurements.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A scalar argument lies outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// The problem cannot be posed, e.g. fewer measurements than `dim(T)`.
    #[error("structural error: {0}")]
    Structural(String),

    /// The restricted map is numerically singular.
    #[error(
        "ill-conditioned restriction to T: sigma_min = {sigma_min:e} (sigma_max = {sigma_max:e})"
    )]
    IllConditioned { sigma_min: f64, sigma_max: f64 },

    /// An error raised inside a Monte Carlo trial, annotated with its position.
    #[error("{context}: {source}")]
    Trial {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn in_context(self, context: impl Into<String>) -> Self {
        Error::Trial {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with trial context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Trial { source, .. } => source.root(),
            other => other,
        }
    }
}
