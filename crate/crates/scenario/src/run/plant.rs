use iiot_core::lambda::{throughput_harness, HarnessConfig, ServiceTime};
use iiot_core::model::validate_plant_profile;

use super::run_err;
use crate::metrics::Metrics;
use crate::schema::Scenario;
use crate::ScenarioError;

pub const DEFAULT_PLANT_DURATION_S: f64 = 60.0;

pub fn run(s: &Scenario, m: &mut Metrics) -> Result<(), ScenarioError> {
    let plant = s.plant.as_ref().ok_or_else(|| run_err("missing plant profile"))?;
    let scale = s.scale.as_ref().ok_or_else(|| run_err("missing scale section"))?;
    let rate = scale.rate_bytes_per_s.unwrap_or_else(|| plant.bytes_per_second());
    let mut cfg = HarnessConfig::new(rate, s.duration_s.unwrap_or(DEFAULT_PLANT_DURATION_S).ceil() as u64);
    cfg.tick_us = scale.tick_ms * 1_000;
    cfg.streams = scale.streams;
    cfg.seed = s.seed;
    cfg.service = ServiceTime::Virtual {
        per_batch_us: scale.per_batch_us,
        per_kib_us: scale.per_kib_us,
    };
    let r = throughput_harness(&cfg);
    for (second, depth) in r.depth_per_second.iter().enumerate() {
        m.row("throughput", &[second.to_string(), depth.to_string()]);
    }
    m.metric("plant_violations", validate_plant_profile(plant).len());
    m.metric("target_bytes_per_s", format!("{rate:.1}"));
    m.metric("bytes", r.bytes);
    m.metric("batches", r.batches);
    m.metric("items", r.items);
    m.metric("max_queue_depth", r.max_queue_depth);
    m.metric("first_half_max_depth", r.first_half_max_depth());
    m.metric("final_half_max_depth", r.final_half_max_depth());
    m.metric("backlog_bounded", u8::from(r.sustained));
    m.metric("p99_apply_latency_us", r.p99_apply_latency_us);
    m.metric("virtual_capacity_bytes_per_s", format!("{:.1}", r.measured_capacity_bytes_per_s));
    m.metric("fleet_target_low_bytes_per_s", format!("{:.1}", scale.fleet_target_low_bytes_per_s));
    m.metric("fleet_target_high_bytes_per_s", format!("{:.1}", scale.fleet_target_high_bytes_per_s));
    let ratio = if scale.fleet_target_low_bytes_per_s > 0.0 {
        r.measured_capacity_bytes_per_s / scale.fleet_target_low_bytes_per_s
    } else {
        0.0
    };
    m.metric("fleet_low_ratio", format!("{ratio:.4}"));
    Ok(())
}
