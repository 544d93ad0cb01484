use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("structure violation: {0}")]
    Structure(String),

    #[error("label error: {0}")]
    Label(String),

    #[error("sequence error: {0}")]
    Sequence(String),

    /// A ratio denominator fell at or below the normalization tolerance.
    #[error("zero normalization: denominator {denominator:e} <= {threshold:e} ({context})")]
    ZeroNormalization {
        context: String,
        denominator: f64,
        threshold: f64,
    },

    /// The simplified state formula needs a completeness property that the
    /// named detector does not have.
    #[error("{detector} is not {property} complete; use the full-ratio mode")]
    Incompleteness {
        detector: String,
        property: &'static str,
    },

    /// Pre- and post-selection states have (numerically) vanishing overlap.
    #[error("zero overlap between pre- and post-selection: |Tr(post pre)| = {overlap:e}")]
    ZeroOverlap { overlap: f64 },

    #[error("enumeration budget exceeded: {tuples} outcome tuples (budget {budget})")]
    Explosion { tuples: u128, budget: u128 },

    #[error("outcome mismatch: {0}")]
    OutcomeMismatch(String),
}

impl Error {
    pub(crate) fn dim(expected: usize, got: usize, what: &str) -> Self {
        Error::Dimension(format!("{what}: expected dim {expected}, got {got}"))
    }
}
