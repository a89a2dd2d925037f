use thiserror::Error;

/// Failure modes shared by every route in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The adaptive mode summation could not resolve a quantity below the
    /// working-precision ceiling.
    #[error("mode sums still unresolved at {bits} fractional bits")]
    PrecisionExhausted { bits: u32 },

    #[error("linear system is singular at pivot column {0}")]
    SingularSystem(usize),

    #[error("trajectory not absorbed within {cap} steps")]
    Runaway { cap: u64 },

    /// The sign pattern of the reset derivative does not have the single
    /// crossing the theory predicts.
    #[error("sign structure violated: {0}")]
    StructuralViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
