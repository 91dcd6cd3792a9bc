//! Reinforced-counter caches and cache networks.
//!
//! * [`counter`]: closed forms for the single-threshold counter.
//! * [`hysteresis`]: exact chain, first-passage times and sojourn laws for
//!   the two-threshold counter.
//! * [`optimizer`]: threshold selection trading insertion rate against
//!   return time.
//! * [`network`]: random-walk routing, flow balance, stability, sizing.
//! * [`placement`]: static placement, exact search, model export and the
//!   Knapsack / Partition constructions.
//! * [`sim`]: discrete-event simulation of counters and networks.
//!
//! The analytical modules are generic over [`Real`]; the aliases below fix
//! the scalar to `f64` or `f32`.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod counter;
pub mod error;
pub mod hysteresis;
pub mod linalg;
pub mod network;
pub mod optimizer;
pub mod output;
pub mod placement;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CounterParams64 = counter::CounterParams<f64>;
pub type CounterParams32 = counter::CounterParams<f32>;
pub type SteadyState64 = counter::SteadyState<f64>;
pub type SteadyState32 = counter::SteadyState<f32>;
pub type HysteresisParams64 = hysteresis::HysteresisParams<f64>;
pub type HysteresisParams32 = hysteresis::HysteresisParams<f32>;
pub type CacheNetwork64 = network::CacheNetwork<f64>;
pub type CacheNetwork32 = network::CacheNetwork<f32>;
pub type AvailabilityProfile64 = network::AvailabilityProfile<f64>;
pub type AvailabilityProfile32 = network::AvailabilityProfile<f32>;
pub type FlowSolution64 = network::FlowSolution<f64>;
pub type FlowSolution32 = network::FlowSolution<f32>;
