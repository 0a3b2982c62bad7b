//! Fieldbus devices behind cloud-managed gateways feeding the platform.
//!
//! Gateway-tier agents translate at the gateway with the rule set pushed to
//! it over the network. Device-tier agents and the platform-side agent use
//! the rule set whose push time has passed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iiot_core::gateway::{push_ruleset, translate, translating_tier, DeviceContext, Gateway, GatewayOutput, TranslationRuleSet};
use iiot_core::lambda::{ForkPlacement, LambdaPipeline};
use iiot_core::model::{
    decode_fieldbus_frame, decode_measurement, encode_fieldbus_frame, encode_measurement, ConnectionPattern,
    FieldbusFrame, Measurement, Origin,
};
use iiot_core::netsim::{EdgeTier, Event, EventKind, Handler, NodeId, SendOutcome, Simulator, Topology};
use iiot_core::platform::{Platform, QueryFilter};

use super::run_err;
use crate::build::{build_platform, build_rulesets, build_topology, fork_placement, pattern_of, us};
use crate::metrics::Metrics;
use crate::schema::Scenario;
use crate::ScenarioError;

const GATEWAY_PATTERNS: [ConnectionPattern; 4] = [
    ConnectionPattern::StandardAgent,
    ConnectionPattern::OpcUaAgent,
    ConnectionPattern::SpecialGatewayAgent,
    ConnectionPattern::HwIntercept,
];

pub const DEFAULT_FLEET_DURATION_S: f64 = 120.0;
const LAMBDA_BUCKET_US: u64 = 10_000_000;

struct Dev {
    id: String,
    tenant: String,
    node: NodeId,
    unit_id: u8,
    pattern: ConnectionPattern,
    next_hop: NodeId,
    sensors: Vec<(u16, i32, i32, u64)>,
    rng: ChaCha8Rng,
}

/// What the fleet run leaves behind for later phases.
pub struct FleetRun {
    pub platform: Platform,
    /// Pipeline fed before platform ingest, when the fork sits at the edge.
    pub edge_lambda: Option<LambdaPipeline>,
    pub topology: Topology,
    pub end_us: u64,
}

struct Fleet {
    devs: Vec<Dev>,
    by_unit: BTreeMap<(NodeId, u8), usize>,
    gateways: BTreeMap<NodeId, Vec<Gateway>>,
    platform_node: NodeId,
    pushes: Vec<(NodeId, NodeId, TranslationRuleSet)>,
    /// (in force from, rule set) for agents outside the gateways.
    schedule: Vec<(u64, TranslationRuleSet)>,
    platform: Platform,
    edge_lambda: Option<LambdaPipeline>,
    edge_seq: u64,
    end_us: u64,
    frames_sent: u64,
    frames_lost: u64,
    agent_unmapped: u64,
    agent_bad: u64,
    agent_by_version: BTreeMap<u64, u64>,
    rules_fired: u64,
    by_pattern: BTreeMap<String, u64>,
    errors: Vec<String>,
}

impl Fleet {
    fn rules_at(&self, now: u64) -> Option<&TranslationRuleSet> {
        self.schedule.iter().rev().find(|(t, _)| *t <= now).map(|(_, r)| r)
    }

    fn send(&mut self, sim: &mut Simulator, from: NodeId, to: NodeId, payload: Vec<u8>, reading: bool) {
        match sim.send(from, to, payload) {
            Ok(SendOutcome::Dropped) if reading => self.frames_lost += 1,
            Ok(_) => {}
            Err(e) => self.errors.push(e.to_string()),
        }
    }

    fn agent_translate(&mut self, frame: &FieldbusFrame, now: u64, dev: usize) -> Option<Measurement> {
        let d = &self.devs[dev];
        let ctx = DeviceContext::new(d.tenant.clone(), d.id.clone());
        let origin = Origin::Via(d.pattern);
        let Some(rules) = self.rules_at(now) else {
            self.agent_unmapped += 1;
            return None;
        };
        let version = rules.version;
        match translate(frame, rules, now, &ctx, origin) {
            Ok(m) => {
                *self.agent_by_version.entry(version).or_default() += 1;
                Some(m)
            }
            Err(_) => {
                self.agent_unmapped += 1;
                None
            }
        }
    }

    fn poll(&mut self, sim: &mut Simulator, dev: usize, sensor: usize) {
        let now = sim.now();
        let d = &mut self.devs[dev];
        let (register, base, noise, period_us) = d.sensors[sensor];
        let raw = base + if noise > 0 { d.rng.gen_range(-noise..=noise) } else { 0 };
        let (node, next_hop, unit, pattern) = (d.node, d.next_hop, d.unit_id, d.pattern);
        if now + period_us <= self.end_us {
            sim.schedule_timer(node, now + period_us, format!("POLL|{dev}|{sensor}").into_bytes());
        }
        self.frames_sent += 1;
        let payload = if translating_tier(pattern) == EdgeTier::Device {
            match self.agent_translate(&FieldbusFrame::new(unit, register, raw), now, dev) {
                Some(m) => encode_measurement(&m).map(String::into_bytes).unwrap_or_default(),
                None => return,
            }
        } else {
            encode_fieldbus_frame(unit, register, raw).to_vec()
        };
        self.send(sim, node, next_hop, payload, true);
    }

    fn at_gateway(&mut self, sim: &mut Simulator, ev: Event) {
        let gw = ev.target;
        let now = sim.now();
        if ev.payload.starts_with(b"RULESET|") {
            for g in self.gateways.get_mut(&gw).into_iter().flatten() {
                if let GatewayOutput::RulesetRejected(e) = g.handle_payload(&ev.payload, now, &DeviceContext::new("-", "-")) {
                    self.errors.push(e.to_string());
                }
            }
            return;
        }
        if ev.payload.starts_with(b"MEAS|") {
            let to = self.platform_node;
            self.send(sim, gw, to, ev.payload, false);
            return;
        }
        let dev = decode_fieldbus_frame(&ev.payload)
            .ok()
            .and_then(|f| self.by_unit.get(&(ev.source, f.unit_id)).copied());
        let pattern = dev.map_or(ConnectionPattern::StandardAgent, |i| self.devs[i].pattern);
        if pattern == ConnectionPattern::PlatformSideAgent {
            let to = self.platform_node;
            self.send(sim, gw, to, ev.payload, false);
            return;
        }
        let ctx = dev.map_or_else(
            || DeviceContext::new("-", "-"),
            |i| DeviceContext::new(self.devs[i].tenant.clone(), self.devs[i].id.clone()),
        );
        let slot = GATEWAY_PATTERNS.iter().position(|p| *p == pattern).unwrap_or(0);
        let Some(g) = self.gateways.get_mut(&gw).and_then(|v| v.get_mut(slot)) else {
            return;
        };
        if let GatewayOutput::Forward(m) = g.handle_payload(&ev.payload, now, &ctx) {
            if let Ok(line) = encode_measurement(&m) {
                let to = self.platform_node;
                self.send(sim, gw, to, line.into_bytes(), false);
            }
        }
    }

    fn at_platform(&mut self, sim: &mut Simulator, ev: Event) {
        let now = sim.now();
        let m = if ev.payload.starts_with(b"MEAS|") {
            match std::str::from_utf8(&ev.payload).map_err(|e| e.to_string()).and_then(|s| decode_measurement(s).map_err(|e| e.to_string())) {
                Ok(m) => m,
                Err(e) => {
                    self.errors.push(e);
                    return;
                }
            }
        } else {
            let Ok(frame) = decode_fieldbus_frame(&ev.payload) else {
                self.agent_bad += 1;
                return;
            };
            let dev = self
                .devs
                .iter()
                .position(|d| d.pattern == ConnectionPattern::PlatformSideAgent && d.unit_id == frame.unit_id);
            let Some(dev) = dev else {
                self.agent_unmapped += 1;
                return;
            };
            match self.agent_translate(&frame, now, dev) {
                Some(m) => m,
                None => return,
            }
        };
        if let Some(l) = self.edge_lambda.as_mut() {
            self.edge_seq += 1;
            l.fork_ingest(self.edge_seq, m.clone());
        }
        if let Origin::Via(p) = m.origin {
            *self.by_pattern.entry(p.to_string()).or_default() += 1;
        }
        if let Ok(receipt) = self.platform.ingest(m) {
            self.rules_fired += receipt.fired.len() as u64;
        }
    }
}

impl Handler for Fleet {
    fn on_event(&mut self, sim: &mut Simulator, ev: Event) {
        if ev.kind == EventKind::Timer {
            let text = String::from_utf8_lossy(&ev.payload).into_owned();
            let f: Vec<&str> = text.split('|').collect();
            match f[..] {
                ["POLL", dev, sensor] => {
                    if let (Ok(d), Ok(s)) = (dev.parse(), sensor.parse()) {
                        self.poll(sim, d, s);
                    }
                }
                ["PUSH", k] => {
                    if let Ok(k) = k.parse::<usize>() {
                        let (from, to, rules) = self.pushes[k].clone();
                        if let Err(e) = push_ruleset(sim, from, to, &rules) {
                            self.errors.push(e.to_string());
                        }
                    }
                }
                _ => {}
            }
            return;
        }
        if ev.target == self.platform_node {
            self.at_platform(sim, ev);
        } else if self.gateways.contains_key(&ev.target) {
            self.at_gateway(sim, ev);
        }
    }
}

fn platform_node(s: &Scenario, t: &Topology) -> Result<NodeId, ScenarioError> {
    match &s.placements.platform {
        Some(name) => t.require(name).map_err(run_err),
        None => t
            .nodes()
            .find(|(_, n)| n.tier == EdgeTier::Cloud && !n.external)
            .map(|(id, _)| id)
            .ok_or_else(|| run_err("no CLOUD node for the platform")),
    }
}

/// Runs the device fleet and writes the fleet metrics.
pub fn run_fleet(s: &Scenario, m: &mut Metrics) -> Result<FleetRun, ScenarioError> {
    let topology = build_topology(s)?;
    let mut platform = build_platform(s)?;
    let rulesets = build_rulesets(s)?;
    let fork = fork_placement(s)?;
    if fork == Some(ForkPlacement::AfterPlatform) {
        platform.attach_lambda(LambdaPipeline::new(LAMBDA_BUCKET_US));
    }
    let platform_node = platform_node(s, &topology)?;
    let end_us = us(s.duration_s.unwrap_or(DEFAULT_FLEET_DURATION_S));

    let mut devs = Vec::new();
    let mut by_unit = BTreeMap::new();
    for (i, d) in s.devices.iter().enumerate() {
        let path = format!("devices.{i}");
        let pattern = pattern_of(d, &path)?;
        let node = topology.require(d.node.as_deref().unwrap_or(&d.id)).map_err(run_err)?;
        let gateway = topology
            .links()
            .filter(|l| l.from == node && topology.node(l.to).tier == EdgeTier::Gateway)
            .map(|l| l.to)
            .next();
        let next_hop = match (translating_tier(pattern), gateway) {
            (EdgeTier::Gateway, None) => {
                return Err(run_err(format!("{}: {pattern} needs a link to a GATEWAY node", d.id)));
            }
            (_, Some(g)) => g,
            (_, None) => platform_node,
        };
        if topology.link(node, next_hop).is_none() {
            return Err(run_err(format!("{}: no link to {}", d.id, topology.node(next_hop).name)));
        }
        by_unit.insert((node, d.unit_id), i);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(i as u64 + 1);
        devs.push(Dev {
            id: d.id.clone(),
            tenant: d.tenant.clone(),
            node,
            unit_id: d.unit_id,
            pattern,
            next_hop,
            sensors: d.sensors.iter().map(|x| (x.register, x.raw_base, x.raw_noise, x.period_ms * 1_000)).collect(),
            rng,
        });
    }

    let mut gateways = BTreeMap::new();
    for (id, n) in topology.nodes() {
        if n.tier == EdgeTier::Gateway {
            gateways.insert(id, GATEWAY_PATTERNS.iter().map(|p| Gateway::new(n.name.clone(), *p)).collect::<Vec<_>>());
        }
    }
    let mut pushes = Vec::new();
    let mut schedule = Vec::new();
    for (at_s, spec, rules) in &rulesets {
        let from = match &spec.from {
            Some(name) => topology.require(name).map_err(run_err)?,
            None => platform_node,
        };
        let to = topology.require(&spec.gateway).map_err(run_err)?;
        pushes.push((from, to, rules.clone()));
        schedule.push((us(*at_s), rules.clone()));
    }

    let mut sim = Simulator::new(topology.clone(), s.seed);
    for (k, (at, _)) in schedule.iter().enumerate() {
        sim.schedule_timer(pushes[k].0, *at, format!("PUSH|{k}").into_bytes());
    }
    for (i, d) in devs.iter().enumerate() {
        for (j, sensor) in d.sensors.iter().enumerate() {
            if sensor.3 <= end_us {
                sim.schedule_timer(d.node, sensor.3, format!("POLL|{i}|{j}").into_bytes());
            }
        }
    }

    let mut fleet = Fleet {
        devs,
        by_unit,
        gateways,
        platform_node,
        pushes,
        schedule,
        platform,
        edge_lambda: (fork == Some(ForkPlacement::BeforePlatformEdge)).then(|| LambdaPipeline::new(LAMBDA_BUCKET_US)),
        edge_seq: 0,
        end_us,
        frames_sent: 0,
        frames_lost: 0,
        agent_unmapped: 0,
        agent_bad: 0,
        agent_by_version: BTreeMap::new(),
        rules_fired: 0,
        by_pattern: BTreeMap::new(),
        errors: Vec::new(),
    };
    sim.run_to_completion(&mut fleet);
    if let Some(e) = fleet.errors.first() {
        return Err(run_err(e));
    }

    let mut by_version = fleet.agent_by_version.clone();
    let (mut unmapped, mut bad) = (fleet.agent_unmapped, fleet.agent_bad);
    for (node, gs) in &fleet.gateways {
        let name = &topology.node(*node).name;
        let mut per_gw: BTreeMap<u64, u64> = BTreeMap::new();
        for g in gs {
            let a = g.audit();
            unmapped += a.unmapped;
            bad += a.bad_frames;
            for (v, n) in &a.translated_by_version {
                *per_gw.entry(*v).or_default() += n;
                *by_version.entry(*v).or_default() += n;
            }
        }
        for (v, n) in &per_gw {
            m.row("ruleset", &[name.clone(), v.to_string(), n.to_string()]);
        }
        m.metric(&format!("gateway_version[{name}]"), gs[0].version());
    }

    for d in &s.devices {
        let filter = QueryFilter {
            owner: Some(d.tenant.clone()),
            device_id: Some(d.id.clone()),
            ..QueryFilter::all()
        };
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for row in fleet.platform.query(&d.tenant, &filter).map_err(run_err)? {
            *counts.entry(row.sensor_id).or_default() += 1;
        }
        for (sensor, n) in counts {
            m.row("meas", &[d.tenant.clone(), d.id.clone(), sensor, n.to_string()]);
        }
    }

    let totals = fleet.platform.totals();
    m.metric("frames_sent", fleet.frames_sent);
    m.metric("frames_translated", by_version.values().sum::<u64>());
    m.metric("frames_unmapped", unmapped);
    m.metric("frames_bad", bad);
    m.metric("frames_lost", fleet.frames_lost);
    m.metric("ingest_submitted", totals.submitted);
    m.metric("ingest_accepted", totals.accepted);
    m.metric("ingest_rejected", totals.rejected);
    m.metric("rules_fired", fleet.rules_fired);
    for (v, n) in &by_version {
        m.metric(&format!("translated_by_version[{v}]"), n);
    }
    for (p, n) in &fleet.by_pattern {
        m.metric(&format!("pattern_measurements[{p}]"), n);
    }
    Ok(FleetRun {
        platform: fleet.platform,
        edge_lambda: fleet.edge_lambda,
        topology,
        end_us,
    })
}
