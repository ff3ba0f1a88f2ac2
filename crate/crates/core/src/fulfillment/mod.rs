//! Dynamic multi-item fulfillment: the deterministic LP benchmark, the
//! randomized and myopic dispatch policies, and the simulation engine.
//!
//! FC indices run over `0..=K` with `0` the null FC, which has unlimited
//! stock and models items that are not fulfilled.

mod dlp;
mod instance;
mod simulate;

use thiserror::Error;

use crate::lp::LpError;
use crate::rounding::RoundingError;

pub use dlp::{build_dlp, solve_dlp, theoretical_beta, BetaReport, DlpIndex, DlPlan, OrderPlan};
pub use instance::{scale, FulfillmentInstance, OrderType, ScaledInstance, RATE_TOLERANCE};
pub use simulate::{
    arrival_seed, decision_seed, loss_pct, simulate, Dispatcher, Policy, SimulationReport, REPORT_HEADER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FulfillmentError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("plan does not match the instance: {0}")]
    PlanMismatch(String),
    #[error("LP solver failed: {0}")]
    Solver(#[from] LpError),
    #[error("DLP is {0:?}")]
    Status(crate::lp::LpStatus),
    #[error("plan invariant violated: {0}")]
    Invariant(String),
    #[error("scale factor {0} must be positive and finite")]
    BadScale(f64),
    #[error("unknown policy `{0}` (expected myopic, independent, dilate, force-open or best-of)")]
    UnknownPolicy(String),
    #[error(transparent)]
    Rounding(#[from] RoundingError),
}
