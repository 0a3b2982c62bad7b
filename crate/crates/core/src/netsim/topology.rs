use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::NetError;

/// Placement along the edge continuum, ordered by distance from the device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeTier {
    Device,
    Gateway,
    FactoryEdge,
    RegionalEdge,
    Cloud,
}

impl EdgeTier {
    pub const ALL: [EdgeTier; 5] = [
        EdgeTier::Device,
        EdgeTier::Gateway,
        EdgeTier::FactoryEdge,
        EdgeTier::RegionalEdge,
        EdgeTier::Cloud,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeTier::Device => "DEVICE",
            EdgeTier::Gateway => "GATEWAY",
            EdgeTier::FactoryEdge => "FACTORY_EDGE",
            EdgeTier::RegionalEdge => "REGIONAL_EDGE",
            EdgeTier::Cloud => "CLOUD",
        }
    }
}

impl fmt::Display for EdgeTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeTier {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EdgeTier::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| NetError::UnknownTier(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub tier: EdgeTier,
    /// Outside the enterprise perimeter (partners, public clients).
    pub external: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bandwidth {
    Unlimited,
    BytesPerSecond(u64),
}

impl Bandwidth {
    /// Time to clock `bytes` onto the link, rounded up to whole microseconds.
    pub fn serialization_us(self, bytes: usize) -> u64 {
        match self {
            Bandwidth::Unlimited => 0,
            Bandwidth::BytesPerSecond(bw) => {
                let num = bytes as u128 * 1_000_000;
                num.div_ceil(u128::from(bw)) as u64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    pub one_way_latency_us: u64,
    pub bandwidth: Bandwidth,
    pub loss_probability: f64,
    pub jitter_us: u64,
}

impl Link {
    /// Deterministic part of the transit time (no jitter).
    pub fn base_transit_us(&self, bytes: usize) -> u64 {
        self.one_way_latency_us + self.bandwidth.serialization_us(bytes)
    }
}

/// Link parameters independent of endpoints, as read from configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub one_way_latency_us: u64,
    pub bandwidth: Bandwidth,
    pub loss_probability: f64,
    pub jitter_us: u64,
}

impl LinkSpec {
    pub fn latency_only(one_way_latency_us: u64) -> Self {
        LinkSpec {
            one_way_latency_us,
            bandwidth: Bandwidth::Unlimited,
            loss_probability: 0.0,
            jitter_us: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Topology {
    nodes: Vec<Node>,
    by_name: BTreeMap<String, NodeId>,
    links: BTreeMap<(NodeId, NodeId), Link>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str, tier: EdgeTier) -> Result<NodeId, NetError> {
        self.add_node_with(name, tier, false)
    }

    pub fn add_external_node(&mut self, name: &str, tier: EdgeTier) -> Result<NodeId, NetError> {
        self.add_node_with(name, tier, true)
    }

    fn add_node_with(&mut self, name: &str, tier: EdgeTier, external: bool) -> Result<NodeId, NetError> {
        if self.by_name.contains_key(name) {
            return Err(NetError::DuplicateNode(name.to_string()));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            name: name.to_string(),
            tier,
            external,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_link(&mut self, from: NodeId, to: NodeId, spec: LinkSpec) -> Result<(), NetError> {
        if from.0 as usize >= self.nodes.len() || to.0 as usize >= self.nodes.len() {
            return Err(NetError::UnknownNode(format!("{from:?}/{to:?}")));
        }
        if !(0.0..=1.0).contains(&spec.loss_probability) {
            return Err(NetError::InvalidLink(format!(
                "loss probability {} outside [0,1]",
                spec.loss_probability
            )));
        }
        if spec.bandwidth == Bandwidth::BytesPerSecond(0) {
            return Err(NetError::InvalidLink("bandwidth must be positive".into()));
        }
        self.links.insert(
            (from, to),
            Link {
                from,
                to,
                one_way_latency_us: spec.one_way_latency_us,
                bandwidth: spec.bandwidth,
                loss_probability: spec.loss_probability,
                jitter_us: spec.jitter_us,
            },
        );
        Ok(())
    }

    /// Adds the link in both directions with identical parameters.
    pub fn add_duplex(&mut self, a: NodeId, b: NodeId, spec: LinkSpec) -> Result<(), NetError> {
        self.add_link(a, b, spec)?;
        self.add_link(b, a, spec)
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<NodeId, NetError> {
        self.node_id(name)
            .ok_or_else(|| NetError::UnknownNode(name.to_string()))
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0 as usize]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn link(&self, from: NodeId, to: NodeId) -> Option<&Link> {
        self.links.get(&(from, to))
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    /// Round trip between `a` and `b`: sum of both one-way latencies for a
    /// zero-size payload, without jitter.
    pub fn measure_rtt(&self, a: NodeId, b: NodeId) -> Result<u64, NetError> {
        let there = self.link(a, b).ok_or_else(|| self.no_route(a, b))?;
        let back = self.link(b, a).ok_or_else(|| self.no_route(b, a))?;
        Ok(there.one_way_latency_us + back.one_way_latency_us)
    }

    pub(crate) fn no_route(&self, from: NodeId, to: NodeId) -> NetError {
        NetError::NoRoute {
            from: self.node(from).name.clone(),
            to: self.node(to).name.clone(),
        }
    }

    /// Nodes reachable from `start` over directed links, never entering any
    /// node in `blocked` (the start node itself is always included).
    pub fn reachable_from(&self, start: NodeId, blocked: &BTreeSet<NodeId>) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for (&(from, to), _) in self.links.range((n, NodeId(0))..=(n, NodeId(u32::MAX))) {
                debug_assert_eq!(from, n);
                if !blocked.contains(&to) && seen.insert(to) {
                    queue.push_back(to);
                }
            }
        }
        seen
    }
}
