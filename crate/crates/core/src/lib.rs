//! Component library for a deterministic, virtual-time industrial IoT
//! simulator.

pub mod analytics;
pub mod apimgmt;
pub mod gateway;
pub mod lambda;
pub mod lowpower;
pub mod model;
pub mod netsim;
pub mod platform;
pub mod stats;
