//! Event-driven paint station run: controller ticks, streaming evaluation
//! at the chosen tier, STOP commands back to the robots, manual repair.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::aggregate::{AggregateRecord, Aggregator};
use super::detect::{process_window, Detector, WindowRule};
use super::station::{PaintStation, SignalModel, NOZZLE_PRESSURE};
use super::AnalyticsError;
use crate::model::{decode_measurement, encode_measurement, Command, Measurement};
use crate::netsim::{EdgeTier, Event, EventKind, LinkSpec, NodeId, Simulator, Topology};
use crate::platform::Comparison;

/// One-way delays along the station → edge → WAN path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathProfile {
    pub controller_to_edge_us: u64,
    pub edge_to_robot_us: u64,
    pub eval_us: u64,
    pub regional_one_way_us: u64,
    pub wan_one_way_us: u64,
    pub cloud_queue_us: u64,
}

impl Default for PathProfile {
    fn default() -> Self {
        PathProfile {
            controller_to_edge_us: 2_000,
            edge_to_robot_us: 3_000,
            eval_us: 5_000,
            regional_one_way_us: 20_000,
            wan_one_way_us: 150_000,
            cloud_queue_us: 100_000,
        }
    }
}

impl PathProfile {
    /// Fixed delay from the controller tick that carries a faulty sample to
    /// the STOP command reaching the robot.
    pub fn reaction_path_us(&self, placement: EdgeTier) -> Result<u64, AnalyticsError> {
        let local = self.controller_to_edge_us + self.eval_us + self.edge_to_robot_us;
        match placement {
            EdgeTier::FactoryEdge => Ok(local),
            EdgeTier::RegionalEdge => Ok(local + 2 * self.regional_one_way_us),
            EdgeTier::Cloud => Ok(local + 2 * self.wan_one_way_us + self.cloud_queue_us),
            other => Err(AnalyticsError::UnsupportedPlacement(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultSpec {
    pub fault_id: u32,
    pub robot: usize,
    pub at_us: u64,
}

/// Spreads `count` faults `spacing_us` apart starting at `start_us`, each at
/// a seeded offset within one uplink interval on a seeded robot. With
/// `boundary_probe` the first fault lands 1 µs after a controller tick.
pub fn generate_faults(
    count: u32,
    robots: usize,
    start_us: u64,
    spacing_us: u64,
    uplink_us: u64,
    boundary_probe: bool,
    seed: u64,
) -> Vec<FaultSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfa17);
    (0..count)
        .map(|k| {
            let base = start_us + u64::from(k) * spacing_us;
            let at_us = if boundary_probe && k == 0 {
                base.div_ceil(uplink_us) * uplink_us + 1
            } else {
                base + rng.gen_range(0..uplink_us)
            };
            FaultSpec {
                fault_id: k,
                robot: rng.gen_range(0..robots),
                at_us,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaintConfig {
    pub station_id: String,
    pub tenant_id: String,
    pub robot_count: usize,
    /// Per-robot duty cycles; seeded aligned periods when `None`.
    pub duty_cycles_us: Option<Vec<u64>>,
    pub uplink_interval_us: u64,
    pub placement: EdgeTier,
    pub path: PathProfile,
    pub faults: Vec<FaultSpec>,
    pub repair_delay_us: u64,
    pub deadline_us: u64,
    pub rules: Vec<WindowRule>,
    /// 0 disables the periodic aggregate uplink.
    pub aggregate_period_us: u64,
    pub signal: SignalModel,
    pub seed: u64,
    /// End of the run; defaults to one fault spacing after the last fault.
    pub end_us: Option<u64>,
}

pub const FAULT_SPACING_US: u64 = 3_000_000;

impl PaintConfig {
    pub fn new(seed: u64) -> Self {
        let robot_count = 8;
        PaintConfig {
            station_id: "ps1".into(),
            tenant_id: "paintshop".into(),
            robot_count,
            duty_cycles_us: None,
            uplink_interval_us: 200_000,
            placement: EdgeTier::FactoryEdge,
            path: PathProfile::default(),
            faults: generate_faults(60, robot_count, 1_000_000, FAULT_SPACING_US, 200_000, true, seed),
            repair_delay_us: 1_000_000,
            deadline_us: 500_000,
            rules: vec![default_rule()],
            aggregate_period_us: 60_000_000,
            signal: SignalModel::default(),
            seed,
            end_us: None,
        }
    }

    pub fn end_us(&self) -> u64 {
        self.end_us.unwrap_or_else(|| {
            self.faults.iter().map(|f| f.at_us).max().unwrap_or(0) + FAULT_SPACING_US
        })
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        self.path.reaction_path_us(self.placement)?;
        if self.uplink_interval_us == 0 {
            return Err(AnalyticsError::InvalidConfig("uplink interval must be positive".into()));
        }
        if self.aggregate_period_us != 0 && self.aggregate_period_us <= self.uplink_interval_us {
            return Err(AnalyticsError::InvalidConfig(
                "aggregate period must exceed the uplink interval".into(),
            ));
        }
        if let Some(f) = self.faults.iter().find(|f| f.robot >= self.robot_count) {
            return Err(AnalyticsError::InvalidConfig(format!(
                "fault {} targets robot {} of {}",
                f.fault_id, f.robot, self.robot_count
            )));
        }
        for r in &self.rules {
            r.validate()?;
        }
        Ok(())
    }
}

/// STOP when the two-tick mean of nozzle pressure drops below 3 bar.
pub fn default_rule() -> WindowRule {
    WindowRule::new("low-air-pressure", NOZZLE_PRESSURE, 2, Detector::MeanThreshold, Comparison::Below, 3.0)
        .expect("static rule is valid")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionRecord {
    pub fault_id: u32,
    pub robot_id: String,
    pub injected_us: u64,
    pub command_arrival_us: Option<u64>,
    pub latency_us: Option<u64>,
    pub deadline_met: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaintOutcome {
    pub placement: EdgeTier,
    pub reactions: Vec<ReactionRecord>,
    pub ticks: u64,
    pub commands_sent: u64,
    pub spurious_commands: u64,
    pub aggregates: Vec<AggregateRecord>,
    pub raw_bytes: u64,
    pub aggregate_bytes: u64,
    pub end_us: u64,
    pub trace_digest: String,
}

impl PaintOutcome {
    pub fn deadline_met_count(&self) -> usize {
        self.reactions.iter().filter(|r| r.deadline_met).count()
    }

    pub fn max_latency_us(&self) -> Option<u64> {
        self.reactions.iter().filter_map(|r| r.latency_us).max()
    }

    pub fn min_latency_us(&self) -> Option<u64> {
        self.reactions.iter().filter_map(|r| r.latency_us).min()
    }
}

/// Closed-form latency of a fault detected at the first tick that carries
/// a faulty sample.
pub fn reaction_latency_oracle(fault_at_us: u64, uplink_us: u64, path_us: u64) -> u64 {
    let tick = fault_at_us.div_ceil(uplink_us).max(1) * uplink_us;
    tick - fault_at_us + path_us
}

struct Nodes {
    controller: NodeId,
    factory_edge: NodeId,
    regional_edge: NodeId,
    cloud: NodeId,
    robots: Vec<NodeId>,
    eval: NodeId,
}

fn build_topology(cfg: &PaintConfig) -> Result<(Topology, Nodes), AnalyticsError> {
    let p = cfg.path;
    let mut t = Topology::new();
    let controller = t.add_node("station-controller", EdgeTier::Gateway)?;
    let factory_edge = t.add_node("factory-edge", EdgeTier::FactoryEdge)?;
    let regional_edge = t.add_node("regional-edge", EdgeTier::RegionalEdge)?;
    let cloud = t.add_node("cloud", EdgeTier::Cloud)?;
    t.add_duplex(controller, factory_edge, LinkSpec::latency_only(p.controller_to_edge_us))?;
    t.add_duplex(factory_edge, regional_edge, LinkSpec::latency_only(p.regional_one_way_us))?;
    t.add_duplex(factory_edge, cloud, LinkSpec::latency_only(p.wan_one_way_us))?;
    let mut robots = Vec::with_capacity(cfg.robot_count);
    for i in 0..cfg.robot_count {
        let r = t.add_node(&format!("robot{:02}", i + 1), EdgeTier::Device)?;
        t.add_duplex(factory_edge, r, LinkSpec::latency_only(p.edge_to_robot_us))?;
        robots.push(r);
    }
    let eval = match cfg.placement {
        EdgeTier::FactoryEdge => factory_edge,
        EdgeTier::RegionalEdge => regional_edge,
        EdgeTier::Cloud => cloud,
        other => return Err(AnalyticsError::UnsupportedPlacement(other)),
    };
    Ok((
        t,
        Nodes {
            controller,
            factory_edge,
            regional_edge,
            cloud,
            robots,
            eval,
        },
    ))
}

/// Streaming evaluation state at the analytics node.
struct Engine {
    rules: Vec<WindowRule>,
    cap: usize,
    windows: BTreeMap<(String, String), Vec<(u64, f64)>>,
    /// Robots with a STOP outstanding; cleared once no rule fires for them.
    commanded: BTreeSet<String>,
}

impl Engine {
    fn new(mut rules: Vec<WindowRule>) -> Self {
        rules.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));
        let cap = rules.iter().map(|r| r.window_len).max().unwrap_or(1);
        Engine {
            rules,
            cap,
            windows: BTreeMap::new(),
            commanded: BTreeSet::new(),
        }
    }

    /// Returns the robot and the first firing rule (by id) for every robot
    /// that needs a new command.
    fn evaluate(&mut self, readings: &[Measurement]) -> Vec<(String, WindowRule)> {
        let mut robots: Vec<&str> = Vec::new();
        for m in readings {
            let w = self.windows.entry((m.device_id.clone(), m.sensor_id.clone())).or_default();
            if w.last().is_none_or(|(t, _)| *t < m.timestamp_us) {
                w.push((m.timestamp_us, m.value));
                if w.len() > self.cap {
                    w.remove(0);
                }
            }
            if robots.last() != Some(&m.device_id.as_str()) {
                robots.push(&m.device_id);
            }
        }
        let mut out = Vec::new();
        for robot in robots {
            let fired = self.rules.iter().find(|r| {
                self.windows
                    .get(&(robot.to_string(), r.sensor_id.clone()))
                    .is_some_and(|w| process_window(r, w))
            });
            match fired {
                Some(rule) => {
                    if self.commanded.insert(robot.to_string()) {
                        out.push((robot.to_string(), rule.clone()));
                    }
                }
                None => {
                    self.commanded.remove(robot);
                }
            }
        }
        out
    }
}

const TICK: &[u8] = b"TICK";
const FAULT: &[u8] = b"FAULT|";
const EVAL: &[u8] = b"EVAL|";
const REPAIR: &[u8] = b"REPAIR|";

pub fn simulate_paint_station(cfg: &PaintConfig) -> Result<PaintOutcome, AnalyticsError> {
    cfg.validate()?;
    let duty = match &cfg.duty_cycles_us {
        Some(d) => d.clone(),
        None => PaintStation::seeded_duty_cycles_us(cfg.robot_count, cfg.seed),
    };
    if duty.len() != cfg.robot_count {
        return Err(AnalyticsError::InvalidConfig(format!(
            "{} duty cycles for {} robots",
            duty.len(),
            cfg.robot_count
        )));
    }
    let mut station = PaintStation::new(&cfg.station_id, &cfg.tenant_id, &duty, cfg.signal, cfg.seed)?;
    let (topo, nodes) = build_topology(cfg)?;
    let mut sim = Simulator::new(topo, cfg.seed);
    let end_us = cfg.end_us();

    let mut reactions: Vec<ReactionRecord> = cfg
        .faults
        .iter()
        .map(|f| ReactionRecord {
            fault_id: f.fault_id,
            robot_id: station.robots[f.robot].robot_id.clone(),
            injected_us: f.at_us,
            command_arrival_us: None,
            latency_us: None,
            deadline_met: false,
        })
        .collect();
    // Faults go in first so a fault and a tick at the same instant resolve
    // fault-first.
    for (i, f) in cfg.faults.iter().enumerate() {
        sim.schedule_timer(nodes.robots[f.robot], f.at_us, [FAULT, i.to_string().as_bytes()].concat());
    }
    sim.schedule_timer(nodes.controller, cfg.uplink_interval_us, TICK.to_vec());

    let mut engine = Engine::new(cfg.rules.clone());
    let mut aggregator = (cfg.aggregate_period_us > 0).then(|| Aggregator::new(cfg.aggregate_period_us));
    let mut aggregates = Vec::new();
    let mut ticks = 0u64;
    let mut commands_sent = 0u64;
    let mut spurious = 0u64;
    let mut open_fault: Vec<Option<usize>> = vec![None; cfg.robot_count];
    let robot_of = |id: NodeId| nodes.robots.iter().position(|r| *r == id);
    let mut failure: Option<AnalyticsError> = None;

    let mut handler = |sim: &mut Simulator, ev: Event| {
        let now = ev.fire_at_us;
        let p = &ev.payload;
        let result: Result<(), AnalyticsError> = (|| {
            match ev.kind {
                EventKind::Timer if ev.target == nodes.controller => {
                    ticks += 1;
                    let lines: String = station
                        .controller_tick(now)
                        .iter()
                        .map(|m| encode_measurement(m).expect("station emits valid readings"))
                        .collect();
                    sim.send(nodes.controller, nodes.factory_edge, lines.into_bytes())?;
                    if now + cfg.uplink_interval_us <= end_us {
                        sim.schedule_timer(nodes.controller, now + cfg.uplink_interval_us, TICK.to_vec());
                    }
                }
                EventKind::Timer if p.starts_with(FAULT) => {
                    let i: usize = std::str::from_utf8(&p[FAULT.len()..]).expect("ascii").parse().expect("index");
                    let robot = cfg.faults[i].robot;
                    if open_fault[robot].is_none() {
                        station.inject_fault(robot, now);
                        open_fault[robot] = Some(i);
                    }
                }
                EventKind::Timer if p.starts_with(REPAIR) => {
                    let robot: usize = std::str::from_utf8(&p[REPAIR.len()..]).expect("ascii").parse().expect("index");
                    station.repair(robot, now);
                    open_fault[robot] = None;
                }
                EventKind::Timer if p.starts_with(EVAL) => {
                    let text = std::str::from_utf8(&p[EVAL.len()..]).expect("utf-8 lines");
                    let readings: Vec<Measurement> = text
                        .lines()
                        .map(decode_measurement)
                        .collect::<Result<_, _>>()?;
                    if let Some(agg) = aggregator.as_mut() {
                        aggregates.extend(agg.observe(&readings));
                    }
                    for (robot_id, rule) in engine.evaluate(&readings) {
                        let cmd = Command::new(&robot_id, rule.action, now, None)?.with_param("rule", rule.rule_id);
                        let idx = station.robot_index(&robot_id).expect("robot of this station");
                        let (from, to) = if nodes.eval == nodes.factory_edge {
                            (nodes.factory_edge, nodes.robots[idx])
                        } else {
                            (nodes.eval, nodes.factory_edge)
                        };
                        sim.send(from, to, cmd.encode().into_bytes())?;
                        commands_sent += 1;
                    }
                }
                EventKind::Timer => {}
                EventKind::Delivery => {
                    let is_cmd = p.starts_with(b"CMD|");
                    if let Some(robot) = robot_of(ev.target) {
                        match open_fault[robot] {
                            Some(i) if reactions[i].command_arrival_us.is_none() => {
                                let r = &mut reactions[i];
                                let latency = now - r.injected_us;
                                r.command_arrival_us = Some(now);
                                r.latency_us = Some(latency);
                                r.deadline_met = latency < cfg.deadline_us;
                                sim.schedule_timer(
                                    ev.target,
                                    now + cfg.repair_delay_us,
                                    [REPAIR, robot.to_string().as_bytes()].concat(),
                                );
                            }
                            _ => spurious += 1,
                        }
                    } else if is_cmd && ev.target == nodes.factory_edge {
                        let cmd = Command::decode(std::str::from_utf8(p).expect("utf-8 command"))?;
                        let idx = station.robot_index(&cmd.device_id).expect("robot of this station");
                        sim.send(nodes.factory_edge, nodes.robots[idx], p.clone())?;
                    } else if ev.target == nodes.eval {
                        let delay = cfg.path.eval_us + if ev.target == nodes.cloud { cfg.path.cloud_queue_us } else { 0 };
                        sim.schedule_timer(nodes.eval, now + delay, [EVAL, p.as_slice()].concat());
                    } else if ev.target == nodes.factory_edge {
                        let next = if nodes.eval == nodes.regional_edge { nodes.regional_edge } else { nodes.cloud };
                        sim.send(nodes.factory_edge, next, p.clone())?;
                    }
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            failure.get_or_insert(e);
        }
    };
    sim.run_until(end_us + cfg.repair_delay_us + 2 * cfg.path.reaction_path_us(cfg.placement)?, &mut handler);
    if let Some(e) = failure {
        return Err(e);
    }
    let (raw_bytes, aggregate_bytes) = match aggregator.as_mut() {
        Some(agg) => {
            aggregates.extend(agg.finish(end_us));
            (agg.raw_bytes, agg.aggregate_bytes)
        }
        None => (0, 0),
    };
    Ok(PaintOutcome {
        placement: cfg.placement,
        reactions,
        ticks,
        commands_sent,
        spurious_commands: spurious,
        aggregates,
        raw_bytes,
        aggregate_bytes,
        end_us,
        trace_digest: sim.trace_digest(),
    })
}
