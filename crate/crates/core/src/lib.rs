//! Forward and inverse fleet assignment on congested route networks.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

// `!(x >= 0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod feasible;
pub mod forward;
pub mod inverse;
pub mod linalg;
pub mod network;
pub mod objective;
pub mod scalar;
pub mod scenarios;
pub mod stackelberg;

pub use error::{Error, Result};
pub use network::{DelayFunction as GenericDelayFunction, NetworkBuilder};
pub use objective::{ConvexityKind, FleetStrategy as GenericFleetStrategy};
pub use scalar::Real;

pub type Network = network::Network<f64>;
pub type DelayFunction = network::DelayFunction<f64>;
pub type RouteFlow = network::RouteFlow<f64>;
pub type LinkFlow = network::LinkFlow<f64>;
pub type FleetStrategy = objective::FleetStrategy<f64>;
pub type ConvexityClass = objective::ConvexityClass<f64>;
pub type ForwardConfig = forward::ForwardConfig<f64>;
pub type AssignmentResult = forward::AssignmentResult<f64>;
pub type InverseConfig = inverse::InverseConfig<f64>;
pub type InverseResult = inverse::InverseResult<f64>;
pub type LinkInverseResult = inverse::LinkInverseResult<f64>;
pub type SimulationConfig = dynamics::SimulationConfig<f64>;
pub type DayState = dynamics::DayState<f64>;
pub type GeneralMixture = stackelberg::GeneralMixture<f64>;
pub type MixedCornerStrategy = stackelberg::MixedCornerStrategy<f64>;
