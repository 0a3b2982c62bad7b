//! Structural and cross-component checks, run before any simulation.

use std::collections::BTreeSet;

use iiot_core::apimgmt::{check_dmz, generate_catalog};
use iiot_core::gateway::translating_tier;
use iiot_core::lowpower::{payload_check, PayloadCheck};
use iiot_core::model::{validate_plant_profile, ConnectionPattern};
use iiot_core::netsim::EdgeTier;

use crate::build::{
    build_apis, build_platform, build_rulesets, build_topology, fork_placement, motion_trace, paint_config, pattern_of,
};
use crate::schema::{Scenario, ScenarioKind};
use crate::Violation;

fn v(path: impl Into<String>, message: impl ToString) -> Violation {
    Violation {
        path: path.into(),
        message: message.to_string(),
    }
}

/// Metric name families each kind emits; per-entity metrics look like
/// `family[entity]`.
pub fn metric_families(kind: ScenarioKind) -> &'static [&'static str] {
    const FLEET: &[&str] = &[
        "frames_sent",
        "frames_translated",
        "frames_unmapped",
        "frames_bad",
        "frames_lost",
        "ingest_submitted",
        "ingest_accepted",
        "ingest_rejected",
        "rules_fired",
        "gateway_version",
        "translated_by_version",
        "pattern_measurements",
    ];
    match kind {
        ScenarioKind::CompressorFleet => FLEET,
        ScenarioKind::PaintStation => &[
            "faults",
            "reactions_detected",
            "deadline_met",
            "deadline_met_rate",
            "deadline_missed_rate",
            "max_latency_us",
            "min_latency_us",
            "mean_latency_us",
            "commands_sent",
            "spurious_commands",
            "ticks",
            "aggregates",
            "raw_bytes",
            "aggregate_bytes",
            "bandwidth_ratio",
            "aggregate_measurements_accepted",
            "trace_digest",
        ],
        ScenarioKind::PlantScale => &[
            "plant_violations",
            "target_bytes_per_s",
            "bytes",
            "batches",
            "items",
            "max_queue_depth",
            "first_half_max_depth",
            "final_half_max_depth",
            "backlog_bounded",
            "p99_apply_latency_us",
            "virtual_capacity_bytes_per_s",
            "fleet_target_low_bytes_per_s",
            "fleet_target_high_bytes_per_s",
            "fleet_low_ratio",
        ],
        ScenarioKind::LpwanFleet => &[
            "devices",
            "sends",
            "sends_total",
            "messages_per_day",
            "lifetime_days",
            "lifetime_years",
            "payload_ok",
            "airtime_us",
            "min_lifetime_years",
        ],
        ScenarioKind::E2eFull => &[
            "frames_sent",
            "frames_translated",
            "frames_unmapped",
            "frames_bad",
            "frames_lost",
            "ingest_submitted",
            "ingest_accepted",
            "ingest_rejected",
            "rules_fired",
            "gateway_version",
            "translated_by_version",
            "pattern_measurements",
            "patterns_seen",
            "lambda_count",
            "lambda_matches_platform",
            "dmz_ok",
            "api_requests",
            "api_answered",
            "api_ok",
            "api_denied",
            "api_max_admitted_in_window",
            "api_limit_sound",
            "api_mean_rtt_us",
            "catalog_bytes",
            "catalog_apis",
            "tenant_leaks",
        ],
    }
}

fn family(metric: &str) -> &str {
    metric.split('[').next().unwrap_or(metric)
}

/// Every violation found; empty means the scenario may run.
pub fn validate(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    if s.name.trim().is_empty() {
        out.push(v("name", "must not be empty"));
    }
    if let Some(d) = s.duration_s {
        if !(d.is_finite() && d > 0.0) {
            out.push(v("duration_s", "must be positive"));
        }
    }

    let topology = if s.topology.nodes.is_empty() {
        None
    } else {
        match build_topology(s) {
            Ok(t) => Some(t),
            Err(e) => {
                out.push(e);
                None
            }
        }
    };
    if let Err(e) = build_platform(s) {
        out.push(e);
    }
    if let Err(e) = fork_placement(s) {
        out.push(e);
    }

    for (i, d) in s.devices.iter().enumerate() {
        let path = format!("devices.{i}");
        let Ok(pattern) = pattern_of(d, &path) else { continue };
        if let Some(t) = &topology {
            let node = d.node.as_deref().unwrap_or(&d.id);
            if matches!(s.kind, ScenarioKind::CompressorFleet | ScenarioKind::E2eFull) {
                match t.node_id(node) {
                    None => out.push(v(format!("{path}.node"), format!("node {node} not in topology"))),
                    Some(id) if translating_tier(pattern) == EdgeTier::Gateway => {
                        if !t.links().any(|l| l.from == id && t.node(l.to).tier == EdgeTier::Gateway) {
                            out.push(v(format!("{path}.node"), format!("{pattern} needs a link from {node} to a GATEWAY node")));
                        }
                    }
                    Some(_) => {}
                }
            }
        }
        if pattern == ConnectionPattern::HwIntercept && d.unit_id == 0 {
            out.push(v(format!("{path}.unit_id"), "a tapped device needs a bus address"));
        }
        if let Some(policy) = &d.policy {
            if let Err(e) = policy.validate() {
                out.push(v(format!("{path}.policy"), e));
            }
            if let PayloadCheck::TooLarge { limit, actual } = payload_check(policy, d.payload_bytes as usize) {
                out.push(v(format!("{path}.payload_bytes"), format!("{actual} bytes exceed the {limit} byte limit")));
            }
        }
        let trace = motion_trace(d);
        if let Some(k) = trace.windows(2).position(|w| w[1].0 < w[0].0) {
            out.push(v(format!("{path}.motion.{}", k + 1), "motion entries go back in time"));
        }
        let mut seen = BTreeSet::new();
        for (j, x) in d.sensors.iter().enumerate() {
            if x.period_ms == 0 {
                out.push(v(format!("{path}.sensors.{j}.period_ms"), "must be positive"));
            }
            if !seen.insert(x.register) && x.register != 0 {
                out.push(v(format!("{path}.sensors.{j}.register"), "register used twice on one device"));
            }
        }
    }

    match build_rulesets(s) {
        Ok(sets) => {
            for (i, (_, spec, _)) in sets.iter().enumerate() {
                if let Some(t) = &topology {
                    match t.node_id(&spec.gateway) {
                        Some(id) if t.node(id).tier == EdgeTier::Gateway => {}
                        _ => out.push(v(format!("rulesets.{i}.gateway"), format!("{} is not a GATEWAY node", spec.gateway))),
                    }
                    if let Some(from) = &spec.from {
                        match t.node_id(from) {
                            Some(id) if t.node(id).tier == EdgeTier::Cloud => {}
                            _ => out.push(v(format!("rulesets.{i}.from"), format!("{from} is not a CLOUD node"))),
                        }
                    }
                }
            }
        }
        Err(e) => out.push(e),
    }

    if !s.apis.is_empty() || s.builtin_apis.is_some() || !s.keys.is_empty() {
        if let Err(e) = build_apis(s) {
            out.push(e);
        }
    }
    if let Some(gw) = &s.placements.api_gateway {
        match topology.as_ref().map(|t| (t, t.node_id(gw))) {
            Some((t, Some(id))) => {
                if let Err(e) = check_dmz(t, id) {
                    out.push(v("placements.api_gateway", e));
                }
            }
            _ => out.push(v("placements.api_gateway", format!("node {gw} not in topology"))),
        }
    }

    if let Some(plant) = &s.plant {
        for violation in validate_plant_profile(plant) {
            out.push(v(format!("plant.{}", violation.field), violation));
        }
    }
    if let Some(e) = &s.energy {
        if let Err(err) = e.validate() {
            out.push(v("energy", err));
        }
    }
    for (i, p) in s.protocols.iter().enumerate() {
        if let Err(e) = p.validate() {
            out.push(v(format!("protocols.{i}"), e));
        }
    }

    match s.kind {
        ScenarioKind::PaintStation => {
            if let Err(e) = paint_config(s) {
                out.push(e);
            }
        }
        ScenarioKind::PlantScale => {
            if s.plant.is_none() {
                out.push(v("plant", "plant_scale needs a plant profile"));
            }
            match &s.scale {
                None => out.push(v("scale", "plant_scale needs a scale section")),
                Some(sc) => {
                    if sc.tick_ms == 0 || sc.streams == 0 {
                        out.push(v("scale", "tick_ms and streams must be positive"));
                    }
                    if sc.per_batch_us < 0.0 || sc.per_kib_us < 0.0 {
                        out.push(v("scale", "service costs must be non-negative"));
                    }
                }
            }
        }
        ScenarioKind::LpwanFleet => {
            for (i, d) in s.devices.iter().enumerate() {
                if d.policy.is_none() {
                    out.push(v(format!("devices.{i}.policy"), "lpwan devices need a messaging policy"));
                }
            }
        }
        ScenarioKind::CompressorFleet | ScenarioKind::E2eFull => {
            if topology.is_none() {
                out.push(v("topology", "fleet scenarios need a topology"));
            }
            if s.rulesets.is_empty() {
                out.push(v("rulesets", "fleet scenarios need at least one rule set"));
            }
            if s.kind == ScenarioKind::E2eFull {
                if s.placements.api_gateway.is_none() {
                    out.push(v("placements.api_gateway", "e2e scenarios need a DMZ gateway"));
                }
                if s.traffic.is_none() {
                    out.push(v("traffic", "e2e scenarios need API traffic"));
                }
            }
        }
    }

    if !s.apis.is_empty() || s.builtin_apis.is_some() {
        if let Ok(gw) = build_apis(s) {
            let descs: Vec<_> = gw.descriptors().cloned().collect();
            if let Err(e) = generate_catalog(&descs) {
                out.push(v("apis", e));
            }
        }
    }

    let families = metric_families(s.kind);
    for (i, a) in s.assertions.iter().enumerate() {
        if !families.contains(&family(&a.metric)) {
            out.push(v(format!("assertions.{i}.metric"), format!("{} does not emit {}", s.kind.as_str(), a.metric)));
        }
    }
    out
}
