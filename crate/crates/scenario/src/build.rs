//! Turns scenario sections into component objects. Every failure names the
//! offending path in the scenario file.

use std::collections::{BTreeMap, BTreeSet};

use iiot_core::analytics::{generate_faults, PaintConfig, WindowRule};
use iiot_core::apimgmt::{
    builtin_descriptors, ApiDescriptor, ApiGateway, ApiKey, ApiLayer, BackendTarget, MediationMap, RateLimit,
};
use iiot_core::gateway::{TranslationRule, TranslationRuleSet};
use iiot_core::lambda::ForkPlacement;
use iiot_core::lowpower::MotionState;
use iiot_core::model::{CommandVerb, ConnectionPattern, Origin};
use iiot_core::netsim::{Bandwidth, EdgeTier, LinkSpec, Topology};
use iiot_core::platform::{
    Condition, DataScope, DeviceDescriptor, Platform, RuleAction, RulePredicate, SensorSpec, SmartRule,
};

use crate::schema::{ConditionKind, DeviceSpec, RulesetSpec, Scenario};
use crate::Violation;

fn v(path: impl Into<String>, message: impl ToString) -> Violation {
    Violation {
        path: path.into(),
        message: message.to_string(),
    }
}

pub fn us(seconds: f64) -> u64 {
    (seconds * 1e6).round() as u64
}

pub fn build_topology(s: &Scenario) -> Result<Topology, Violation> {
    let mut t = Topology::new();
    for (i, n) in s.topology.nodes.iter().enumerate() {
        let r = if n.external {
            t.add_external_node(&n.name, n.tier)
        } else {
            t.add_node(&n.name, n.tier)
        };
        r.map_err(|e| v(format!("topology.nodes.{i}"), e))?;
    }
    for (i, l) in s.topology.links.iter().enumerate() {
        let path = format!("topology.links.{i}");
        let from = t.require(&l.from).map_err(|e| v(&path, e))?;
        let to = t.require(&l.to).map_err(|e| v(&path, e))?;
        let spec = LinkSpec {
            one_way_latency_us: l.latency_us,
            bandwidth: l.bandwidth_bytes_per_s.map_or(Bandwidth::Unlimited, Bandwidth::BytesPerSecond),
            loss_probability: l.loss,
            jitter_us: l.jitter_us,
        };
        let r = if l.duplex {
            t.add_duplex(from, to, spec)
        } else {
            t.add_link(from, to, spec)
        };
        r.map_err(|e| v(&path, e))?;
    }
    Ok(t)
}

/// Follows parent links; a revisit is a cycle.
pub fn tenant_cycle(s: &Scenario) -> Option<(usize, Vec<String>)> {
    let parent: BTreeMap<&str, &str> = s
        .tenants
        .iter()
        .filter_map(|t| t.parent.as_deref().map(|p| (t.id.as_str(), p)))
        .collect();
    for (i, t) in s.tenants.iter().enumerate() {
        let mut path = vec![t.id.as_str()];
        let mut cur = t.id.as_str();
        while let Some(&p) = parent.get(cur) {
            if let Some(pos) = path.iter().position(|x| *x == p) {
                let mut cycle: Vec<String> = path[pos..].iter().map(|x| x.to_string()).collect();
                cycle.push(p.to_string());
                return Some((i, cycle));
            }
            path.push(p);
            cur = p;
        }
    }
    None
}

pub fn pattern_of(d: &DeviceSpec, path: &str) -> Result<ConnectionPattern, Violation> {
    d.pattern.parse().map_err(|e| v(format!("{path}.pattern"), e))
}

/// Tenants (parents first), grants, devices (activated) and rules.
pub fn build_platform(s: &Scenario) -> Result<Platform, Violation> {
    if let Some((i, cycle)) = tenant_cycle(s) {
        return Err(v(format!("tenants.{i}.parent"), format!("tenant cycle {}", cycle.join(" -> "))));
    }
    let mut p = Platform::new();
    let mut created: BTreeSet<&str> = BTreeSet::new();
    while created.len() < s.tenants.len() {
        let before = created.len();
        for (i, t) in s.tenants.iter().enumerate() {
            if created.contains(t.id.as_str()) {
                continue;
            }
            let ready = t.parent.as_deref().is_none_or(|par| created.contains(par));
            let known_parent = t.parent.as_deref().is_none_or(|par| s.tenants.iter().any(|x| x.id == par));
            if ready || !known_parent {
                p.create_tenant(&t.id, t.parent.as_deref(), t.capable, t.apps.iter().cloned())
                    .map_err(|e| v(format!("tenants.{i}"), e))?;
                created.insert(&t.id);
            }
        }
        if created.len() == before {
            return Err(v("tenants", "parents cannot be ordered"));
        }
    }
    for (i, d) in s.devices.iter().enumerate() {
        let path = format!("devices.{i}");
        let pattern = pattern_of(d, &path)?;
        let sensors = d
            .sensors
            .iter()
            .map(|x| SensorSpec::new(x.id.clone(), x.unit.clone(), x.period_ms))
            .collect();
        p.register_device(&d.tenant, DeviceDescriptor::new(d.id.clone(), Origin::Via(pattern), sensors))
            .map_err(|e| v(&path, e))?;
        p.activate(&d.id).map_err(|e| v(&path, e))?;
    }
    for (i, g) in s.grants.iter().enumerate() {
        let scope = match (&g.device, &g.sensor) {
            (None, None) => DataScope::All,
            (Some(d), None) => DataScope::Device(d.clone()),
            (Some(d), Some(x)) => DataScope::Sensor {
                device_id: d.clone(),
                sensor_id: x.clone(),
            },
            (None, Some(_)) => return Err(v(format!("grants.{i}.sensor"), "a sensor grant needs a device")),
        };
        p.grant(&g.owner, &g.grantee, scope).map_err(|e| v(format!("grants.{i}"), e))?;
    }
    for (i, r) in s.rules.iter().enumerate() {
        let path = format!("rules.{i}");
        let condition = match r.condition {
            ConditionKind::Threshold => Condition::Threshold { cmp: r.cmp, bound: r.bound },
            ConditionKind::WindowAverage => Condition::WindowAverage {
                len: r.window,
                cmp: r.cmp,
                bound: r.bound,
            },
            ConditionKind::WindowTrend => Condition::WindowTrend {
                len: r.window,
                cmp: r.cmp,
                bound_per_s: r.bound,
            },
        };
        let action = match (&r.command, &r.event) {
            (Some(verb), _) => RuleAction::EmitCommand {
                verb: verb_from(verb).ok_or_else(|| v(format!("{path}.command"), format!("unknown verb {verb}")))?,
                params: BTreeMap::new(),
            },
            (None, Some(name)) => RuleAction::EmitEvent { name: name.clone() },
            (None, None) => RuleAction::EmitEvent {
                name: format!("{}-fired", r.id),
            },
        };
        let rule = SmartRule {
            rule_id: r.id.clone(),
            tenant_id: r.tenant.clone(),
            predicate: RulePredicate {
                sensor_id: r.sensor.clone(),
                device_id: r.device.clone(),
                condition,
            },
            action,
            enabled: true,
        };
        p.add_rule(rule).map_err(|e| v(&path, e))?;
    }
    Ok(p)
}

fn verb_from(s: &str) -> Option<CommandVerb> {
    toml::Value::String(s.to_string()).try_into().ok()
}

pub fn build_ruleset(spec: &RulesetSpec, path: &str) -> Result<TranslationRuleSet, Violation> {
    let mut set = TranslationRuleSet::new(spec.version);
    for (j, r) in spec.rules.iter().enumerate() {
        set.insert(r.unit_id, r.register, TranslationRule::new(r.sensor.clone(), r.scale, r.offset, r.unit.clone()))
            .map_err(|e| v(format!("{path}.rules.{j}"), e))?;
    }
    Ok(set)
}

pub fn build_rulesets(s: &Scenario) -> Result<Vec<(f64, &RulesetSpec, TranslationRuleSet)>, Violation> {
    let mut out: Vec<(f64, &RulesetSpec, TranslationRuleSet)> = Vec::new();
    for (i, r) in s.rulesets.iter().enumerate() {
        let path = format!("rulesets.{i}");
        if let Some((_, prev, _)) = out.last() {
            if r.version <= prev.version || r.push_at_s < prev.push_at_s {
                return Err(v(&path, "rule sets must be listed in increasing version and push time"));
            }
        }
        out.push((r.push_at_s, r, build_ruleset(r, &path)?));
    }
    Ok(out)
}

pub fn build_apis(s: &Scenario) -> Result<ApiGateway, Violation> {
    let mut descriptors = s.builtin_apis.as_deref().map(builtin_descriptors).unwrap_or_default();
    for (i, a) in s.apis.iter().enumerate() {
        let path = format!("apis.{i}");
        let layer: ApiLayer = a.layer.parse().map_err(|e| v(format!("{path}.layer"), e))?;
        let backend: BackendTarget = a.backend.parse().map_err(|e| v(format!("{path}.backend"), e))?;
        let mut d = ApiDescriptor::new(&a.id, layer, backend).rate_limit(RateLimit::new(a.rate_n, a.rate_window_ms * 1_000));
        for p in &a.params {
            d = d.param(p);
        }
        for p in &a.require {
            d = d.require(p);
        }
        for dep in &a.depends_on {
            d = d.depends_on(dep);
        }
        if !a.mediation.is_empty() {
            d = d.mediation(MediationMap::new(a.mediation.clone()));
        }
        descriptors.push(d);
    }
    let mut gw = ApiGateway::new(descriptors).map_err(|e| v("apis", e))?;
    for (i, k) in s.keys.iter().enumerate() {
        let key = ApiKey::new(&k.id, &k.secret, k.scopes.iter().cloned(), RateLimit::new(k.rate_n, k.rate_window_ms * 1_000))
            .map_err(|e| v(format!("keys.{i}"), e))?;
        gw.issue_key(key).map_err(|e| v(format!("keys.{i}"), e))?;
    }
    Ok(gw)
}

pub fn fork_placement(s: &Scenario) -> Result<Option<ForkPlacement>, Violation> {
    s.placements
        .lambda_fork
        .as_deref()
        .map(|f| f.parse().map_err(|e| v("placements.lambda_fork", e)))
        .transpose()
}

pub fn paint_config(s: &Scenario) -> Result<PaintConfig, Violation> {
    let mut cfg = PaintConfig::new(s.seed);
    if let Some(p) = &s.paint {
        cfg.robot_count = p.robots;
        cfg.uplink_interval_us = p.uplink_interval_ms * 1_000;
        cfg.deadline_us = p.deadline_ms * 1_000;
        cfg.repair_delay_us = p.repair_ms * 1_000;
        cfg.aggregate_period_us = p.aggregate_period_s * 1_000_000;
        if let Some(path) = &p.path {
            let d = &mut cfg.path;
            d.controller_to_edge_us = path.controller_to_edge_us.unwrap_or(d.controller_to_edge_us);
            d.edge_to_robot_us = path.edge_to_robot_us.unwrap_or(d.edge_to_robot_us);
            d.eval_us = path.eval_us.unwrap_or(d.eval_us);
            d.regional_one_way_us = path.regional_us.unwrap_or(d.regional_one_way_us);
            d.wan_one_way_us = path.wan_us.unwrap_or(d.wan_one_way_us);
            d.cloud_queue_us = path.cloud_queue_us.unwrap_or(d.cloud_queue_us);
        }
        if !p.rules.is_empty() {
            cfg.rules = p
                .rules
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let mut rule = WindowRule::new(r.id.clone(), r.sensor.clone(), r.window, r.detector, r.cmp, r.bound)
                        .map_err(|e| v(format!("paint.rules.{i}"), e))?;
                    rule.action = r.action;
                    Ok(rule)
                })
                .collect::<Result<_, Violation>>()?;
        }
    }
    if let Some(tier) = s.placements.analytics {
        cfg.placement = tier;
    }
    let f = s.faults.as_ref();
    cfg.faults = generate_faults(
        f.map_or(60, |f| f.count),
        cfg.robot_count,
        us(f.map_or(1.0, |f| f.start_s)),
        us(f.map_or(3.0, |f| f.spacing_s)),
        cfg.uplink_interval_us,
        f.is_none_or(|f| f.boundary_probe),
        s.seed,
    );
    cfg.end_us = s.duration_s.map(us);
    if !(iiot_core::analytics::ROBOT_COUNT_RANGE).contains(&cfg.robot_count) {
        return Err(v("paint.robots", format!("{} robots outside 6..=12", cfg.robot_count)));
    }
    if cfg.placement == EdgeTier::Device || cfg.placement == EdgeTier::Gateway {
        return Err(v("placements.analytics", format!("analytics cannot run at {}", cfg.placement)));
    }
    cfg.validate().map_err(|e| v("paint", e))?;
    Ok(cfg)
}

pub fn motion_trace(d: &DeviceSpec) -> Vec<(u64, MotionState)> {
    d.motion.iter().map(|m| (m.at_s * 1_000_000, m.state)).collect()
}
