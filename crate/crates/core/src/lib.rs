//! Trace-driven, packet-level discrete-event simulation of aeronautical
//! ad-hoc networks.
//!
//! Aircraft follow waypoint traces ([`mobility`]), emit messages at
//! timestamps taken from per-node traces ([`traffic`], [`tracegen`]), share
//! the medium through an oracle TDMA scheduler ([`tdma`]) and lose packets
//! according to an SNR to PER lookup table fed by a free-space link budget
//! ([`linkbudget`], [`radio`]). [`scenario`] wires everything onto the
//! [`engine`].

pub mod config;
pub mod engine;
pub mod linkbudget;
pub mod mobility;
pub mod radio;
pub mod scenario;
pub mod tdma;
pub mod tracegen;
pub mod traffic;

pub use engine::{RngStream, SimTime};
pub use linkbudget::{LinkBudgetParams, PathLoss};
pub use mobility::{MobilityTrace, Position};
pub use radio::{RadioConfig, Reception, SnrPerTable};
pub use scenario::{RunResult, ScenarioConfig, ScenarioError};
pub use tdma::{TdmaConfig, TdmaSchedule, TdmaScheduler};
