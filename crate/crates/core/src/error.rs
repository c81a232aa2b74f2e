use thiserror::Error;

/// Errors raised by measure evaluation, mechanism design and the oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty probability vector")]
    Empty,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("entry {index} is not finite: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("entry {index} is negative: {value}")]
    NegativeProbability { index: usize, value: f64 },

    #[error("not normalized: sum = {sum}")]
    NotNormalized { sum: f64 },

    #[error("row {row} of mechanism is not normalized: sum = {sum}")]
    RowNotNormalized { row: usize, sum: f64 },

    #[error("absolute continuity violated at index {index}: p = {p}, q = 0")]
    AbsoluteContinuityViolated { index: usize, p: f64 },

    #[error("distribution is not interior: entry {index} = {value}")]
    NotInterior { index: usize, value: f64 },

    #[error("budget {budget} bits for hypothesis {hypothesis} exceeds its entropy {entropy} bits")]
    BudgetExceedsEntropy {
        hypothesis: usize,
        budget: f64,
        entropy: f64,
    },

    #[error("negative budget {budget} for hypothesis {hypothesis}")]
    NegativeBudget { hypothesis: usize, budget: f64 },

    #[error("assembled mechanism has negative entry {value} at ({row}, {col}); shrink the budget")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("perturbation rows are not orthogonal to sqrt(w0): residual {residual}")]
    NotOrthogonal { residual: f64 },

    #[error("Renyi order must lie in (0, 1), got {0}")]
    InvalidOrder(f64),

    #[error("{what} did not converge after {iterations} iterations (residual {residual})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("dimension {dim} too large for brute force (max {max})")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
