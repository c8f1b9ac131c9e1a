use alloc::string::String;

use crate::efg::ValidationReport;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The game or strategy does not have the shape an operation needs.
    #[error("structural error: {0}")]
    Structure(String),
    /// A behavioral plan has no distribution for an information set in the tree.
    #[error("plan has no distribution for information set `{0}`")]
    MissingInfoset(String),
    /// A network description failed validation.
    #[error("validation failed with {} violation(s)", .0.violations.len())]
    Invalid(ValidationReport),
    /// Exhaustive enumeration was requested above the configured cap.
    #[error(
        "exhaustive check needs {count} pure profiles, above the cap of {cap}; use sampled mode"
    )]
    ExhaustiveCap { count: u128, cap: u128 },
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// An iterate became NaN or infinite.
    #[error("non-finite iterate at step {0}")]
    Diverged(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("insufficient data for a rate fit: {usable} usable point(s), need {needed}")]
    InsufficientData { usable: usize, needed: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
