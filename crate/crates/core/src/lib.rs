//! Correlated rounding schemes for multi-item order fulfillment, an
//! instance-optimal rounding LP, the set-cover bridge, and a dynamic
//! fulfillment simulator built on a deterministic LP.

pub mod bench;
pub mod experiment;
pub mod fulfillment;
pub mod instance_gen;
pub mod lp;
pub mod optimal;
pub mod rng;
pub mod rounding;
pub mod set_cover;

pub use rng::RandomStream;
