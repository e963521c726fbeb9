//! Deterministic discrete-time delay tolerant network simulator.
//!
//! Nodes move over a road graph, exchange messages over short-range links and
//! route them with Epidemic or Spray-and-Wait. A run is fully determined by its
//! [`sim::Scenario`] and seed.

pub mod cli;
pub mod config;
pub mod error;
pub mod ids;
pub mod link;
pub mod map;
pub mod mobility;
pub mod reports;
pub mod rng;
pub mod routing;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};
pub use ids::{MessageId, NodeId};
pub use reports::ReportBundle;
pub use sim::{run, Scenario, Simulation};
