//! Correlated rounding: given per-item marginal distributions over FCs,
//! assign every item to one FC so that each marginal is matched exactly
//! while keeping the probability that any FC is used small.

mod guarantee;
pub mod io;
mod matrix;
mod monte_carlo;
mod schemes;

use thiserror::Error;

pub use guarantee::{
    guarantee, guarantee_dilate, guarantee_force_open, guarantee_js, select_scheme, SchemeChoice,
};
pub use matrix::{
    usage_lower_bounds, validate, MarginalMatrix, SparsityStats, UsageBounds, ROW_SUM_TOLERANCE,
};
pub use monte_carlo::{
    binomial_slack, check_bounds, mc_estimate, tail_grid, BoundCheck, McEstimate,
};
pub use schemes::{
    dilate_round, force_open_round, hiding_probability, independent_round, round, round_into,
    RoundingOutcome, RoundingTrace, Scheme, Workspace,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoundingError {
    #[error("instance has no items or no FCs")]
    EmptyInstance,
    #[error("expected {expected} entries, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("row {item} has {found} entries, expected {expected}")]
    RaggedRow {
        item: usize,
        expected: usize,
        found: usize,
    },
    #[error("entry ({item}, {fc}) is not finite")]
    NonFinite { item: usize, fc: usize },
    #[error("entry ({item}, {fc}) is negative: {value}")]
    NegativeEntry { item: usize, fc: usize, value: f64 },
    #[error("row {item} sums to {sum}, not 1")]
    RowSumMismatch { item: usize, sum: f64 },
    #[error("probability {0} outside (0, 1]")]
    DomainError(f64),
    #[error("unknown scheme `{0}` (expected independent, dilate or force-open)")]
    UnknownScheme(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
