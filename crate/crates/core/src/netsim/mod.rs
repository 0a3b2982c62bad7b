//! Deterministic discrete-event network on a virtual microsecond clock.
//!
//! Nodes sit at a tier of the edge continuum and talk over directed links
//! with latency, bandwidth, loss and jitter. A single [`Simulator`] owns the
//! event queue; node logic runs inside [`Handler`] callbacks. All randomness
//! comes from per-link ChaCha streams derived from the scenario seed.

mod scheduler;
mod topology;

use thiserror::Error;

pub use scheduler::{Event, EventKind, Handler, NetStats, SendOutcome, Simulator};
pub use topology::{Bandwidth, EdgeTier, Link, LinkSpec, Node, NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("no route from {from} to {to}")]
    NoRoute { from: String, to: String },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("duplicate node {0}")]
    DuplicateNode(String),
    #[error("unknown tier {0}")]
    UnknownTier(String),
    #[error("invalid link: {0}")]
    InvalidLink(String),
}
