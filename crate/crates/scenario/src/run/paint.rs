use std::collections::BTreeMap;

use iiot_core::analytics::simulate_paint_station;
use iiot_core::model::{format_value, Origin};
use iiot_core::platform::{DeviceDescriptor, Platform, QueryFilter, SensorSpec};

use super::run_err;
use crate::build::paint_config;
use crate::metrics::Metrics;
use crate::schema::Scenario;
use crate::ScenarioError;

pub fn run(s: &Scenario, m: &mut Metrics) -> Result<(), ScenarioError> {
    let cfg = paint_config(s)?;
    let out = simulate_paint_station(&cfg).map_err(run_err)?;
    let placement = out.placement.to_string();
    for r in &out.reactions {
        m.row(
            "reaction",
            &[
                placement.clone(),
                r.fault_id.to_string(),
                r.robot_id.clone(),
                r.injected_us.to_string(),
                r.command_arrival_us.map_or_else(String::new, |t| t.to_string()),
                r.latency_us.map_or_else(String::new, |t| t.to_string()),
                u8::from(r.deadline_met).to_string(),
            ],
        );
    }
    for a in &out.aggregates {
        m.row(
            "aggregate",
            &[
                a.device_id.clone(),
                a.sensor_id.clone(),
                a.from_us.to_string(),
                a.to_us.to_string(),
                a.count.to_string(),
                format_value(a.min),
                format_value(a.max),
                format_value(a.mean),
            ],
        );
    }

    // The aggregate uplink lands in the platform as synthetic sensors.
    let mut platform = Platform::new();
    platform.create_tenant(&cfg.tenant_id, None, false, ["monitor"]).map_err(run_err)?;
    let mut streams: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut expanded = Vec::new();
    for a in &out.aggregates {
        for x in a.to_measurements().map_err(run_err)? {
            streams.entry(x.device_id.clone()).or_default().insert(x.sensor_id.clone(), x.unit.clone());
            expanded.push(x);
        }
    }
    for (device, sensors) in &streams {
        let specs = sensors.iter().map(|(id, unit)| SensorSpec::new(id.clone(), unit.clone(), 60_000)).collect();
        platform.register_device(&cfg.tenant_id, DeviceDescriptor::new(device.clone(), Origin::Native, specs)).map_err(run_err)?;
        platform.activate(device).map_err(run_err)?;
    }
    let mut accepted = 0u64;
    for x in expanded {
        accepted += u64::from(platform.ingest(x).is_ok());
    }
    let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    for row in platform.query(&cfg.tenant_id, &QueryFilter::all()).map_err(run_err)? {
        *counts.entry((row.device_id, row.sensor_id)).or_default() += 1;
    }
    for ((device, sensor), n) in counts {
        m.row("meas", &[cfg.tenant_id.clone(), device, sensor, n.to_string()]);
    }

    let faults = out.reactions.len();
    let met = out.deadline_met_count();
    let detected: Vec<u64> = out.reactions.iter().filter_map(|r| r.latency_us).collect();
    m.metric("faults", faults);
    m.metric("reactions_detected", detected.len());
    m.metric("deadline_met", met);
    let rate = if faults == 0 { 0.0 } else { met as f64 / faults as f64 };
    m.metric("deadline_met_rate", format!("{rate:.6}"));
    m.metric("deadline_missed_rate", format!("{:.6}", if faults == 0 { 0.0 } else { 1.0 - rate }));
    m.metric("max_latency_us", out.max_latency_us().unwrap_or(0));
    m.metric("min_latency_us", out.min_latency_us().unwrap_or(0));
    let mean = if detected.is_empty() { 0 } else { detected.iter().sum::<u64>() / detected.len() as u64 };
    m.metric("mean_latency_us", mean);
    m.metric("commands_sent", out.commands_sent);
    m.metric("spurious_commands", out.spurious_commands);
    m.metric("ticks", out.ticks);
    m.metric("aggregates", out.aggregates.len());
    m.metric("raw_bytes", out.raw_bytes);
    m.metric("aggregate_bytes", out.aggregate_bytes);
    let ratio = if out.raw_bytes == 0 { 0.0 } else { out.aggregate_bytes as f64 / out.raw_bytes as f64 };
    m.metric("bandwidth_ratio", format!("{ratio:.6}"));
    m.metric("aggregate_measurements_accepted", accepted);
    m.metric("trace_digest", &out.trace_digest);
    Ok(())
}
