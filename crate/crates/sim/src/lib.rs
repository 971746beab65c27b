//! Deterministic generator of school-building sensor traffic: classroom nodes
//! and a three-phase power meter emitting encoded frames on a virtual clock.

pub mod config;
pub mod demo;
pub mod fleet;
pub mod model;

use gaia_core::{ConfigError, Metric};
use thiserror::Error;

pub use config::{AppliesTo, FaultKind, FaultSpec, Occupancy, SimConfig};
pub use fleet::{build_fleet, write_replay, Fleet, SimFrame};
pub use model::Model;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("node {node_id} does not carry {metric}")]
    MetricNotOnNode { node_id: u16, metric: Metric },
}
