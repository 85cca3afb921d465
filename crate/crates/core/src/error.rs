use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation (invalid point,
    /// wrong variable layout, zero-mass conditioning event, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A conditional probability that appears in a denominator is below the
    /// distribution's positivity floor.
    #[error("positivity violation: {what} = {value:.3e} is below the floor {floor:.3e}")]
    Positivity {
        what: String,
        value: f64,
        floor: f64,
    },

    /// A precondition of the operation does not hold (e.g. a path leaves the
    /// probability simplex).
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The distribution does not satisfy a semiparametric model restriction.
    #[error("model restriction violated: {0}")]
    Model(String),

    /// The parametric family has zero Fisher information.
    #[error("degenerate family: {0}")]
    Degenerate(String),

    /// A structurally invalid distribution, table, or configuration.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

/// Returns `Ok(value)` when `value >= floor`, a positivity error otherwise.
pub(crate) fn require_floor(what: impl FnOnce() -> String, value: f64, floor: f64) -> Result<f64> {
    if value >= floor && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Positivity {
            what: what(),
            value,
            floor,
        })
    }
}
