//! Trial-level regression with categorical interactions, interaction
//! strengths, and Welch's t-test.

mod design;
mod ols;
mod welch;

pub use design::{build_design, AllomorphCoding, Design, TrialRow};
pub use ols::{compare_interactions, fit_ols, interaction_strength, InteractionComparison, RegressionFit};
pub use welch::{welch_t, WelchResult};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("design is rank deficient; aliased terms: {0:?}")]
    Singular(Vec<String>),
    #[error("need at least as many rows as columns ({rows} < {cols})")]
    TooFewRows { rows: usize, cols: usize },
    #[error("degenerate groups: {0}")]
    Degenerate(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = StatsError> = std::result::Result<T, E>;

/// Marker joining factor levels in interaction term names.
pub const INTERACTION: &str = " × ";
