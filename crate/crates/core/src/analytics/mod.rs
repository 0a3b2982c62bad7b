//! Streaming analytics that can run at any tier of the edge continuum,
//! exercised through the paint station: robots, a station controller with
//! a fixed uplink interval, window rules and corrective commands.

mod aggregate;
mod detect;
mod engine;
mod station;

use thiserror::Error;

use crate::model::ModelError;
use crate::netsim::{EdgeTier, NetError};

pub use aggregate::{AggregateRecord, Aggregator};
pub use detect::{process_window, Detector, WindowRule};
pub use engine::{
    default_rule, generate_faults, reaction_latency_oracle, simulate_paint_station, FaultSpec, PaintConfig,
    PaintOutcome, PathProfile, ReactionRecord, FAULT_SPACING_US,
};
pub use station::{
    PaintStation, Robot, SignalModel, ALIGNED_DUTY_CYCLES_MS, NOZZLE_PRESSURE, PAINT_FLOW, ROBOT_COUNT_RANGE, SENSORS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("robot count {0} outside 6..=12")]
    RobotCount(usize),
    #[error("duty cycle {0} us outside 4..=20 ms")]
    DutyCycle(u64),
    #[error("invalid window rule: {0}")]
    InvalidRule(String),
    #[error("analytics cannot be placed at {0}")]
    UnsupportedPlacement(EdgeTier),
    #[error("invalid paint station config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[cfg(test)]
mod tests;
