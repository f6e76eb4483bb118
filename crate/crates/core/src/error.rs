use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A result does not fit in the integer type used to carry it.
    #[error("{what} overflows the representable range")]
    Overflow { what: String },

    /// A configured size limit would be exceeded.
    #[error("{what} = {size} exceeds the configured cap of {cap}")]
    SizeCap { what: String, size: u128, cap: u128 },

    #[error("matrix shape {rows}x{cols}: {reason}")]
    Shape {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error(
        "matrix is not unitary: max |U^dagger U - I| = {deviation:e} (tolerance {tolerance:e})"
    )]
    NotUnitary { deviation: f64, tolerance: f64 },

    #[error("invalid circuit plan: {0}")]
    InvalidPlan(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    /// Infeasible numeric input for an inversion, e.g. P2 larger than S^2.
    #[error("infeasible input: {0}")]
    Infeasible(String),

    #[error("distribution has zero total mass")]
    EmptyDistribution,

    #[error("no trials survived post-selection")]
    NoKeptTrials,

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn size_cap(what: impl Into<String>, size: u128, cap: u128) -> Self {
        Error::SizeCap {
            what: what.into(),
            size,
            cap,
        }
    }

    /// True for errors raised because a size limit was hit.
    pub fn is_size_cap(&self) -> bool {
        matches!(self, Error::SizeCap { .. } | Error::Overflow { .. })
    }
}
