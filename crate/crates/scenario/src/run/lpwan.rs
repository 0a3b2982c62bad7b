use iiot_core::lowpower::{
    days_to_years, estimate_lifetime, next_transmissions, payload_check, MotionProfile, MotionState, PayloadCheck,
    ProtocolProfile, DAY_US,
};

use super::run_err;
use crate::build::{motion_trace, us};
use crate::metrics::Metrics;
use crate::schema::Scenario;
use crate::ScenarioError;

pub const DEFAULT_LPWAN_DURATION_S: f64 = 86_400.0;

/// Average movement implied by a trace observed over `horizon_us`.
pub fn profile_from_trace(trace: &[(u64, MotionState)], horizon_us: u64) -> MotionProfile {
    if horizon_us == 0 {
        return MotionProfile::stationary();
    }
    let mut state = MotionState::Stationary;
    let mut since = 0u64;
    let mut trips = 0u64;
    let mut moving_us = 0u64;
    for &(at, next) in trace.iter().filter(|(at, _)| *at <= horizon_us) {
        if next == state {
            continue;
        }
        if state == MotionState::Moving {
            moving_us += at - since;
        } else {
            trips += 1;
        }
        state = next;
        since = at;
    }
    if state == MotionState::Moving {
        moving_us += horizon_us - since;
    }
    let days = horizon_us as f64 / DAY_US as f64;
    MotionProfile {
        trips_per_day: trips as f64 / days,
        moving_hours_per_day: moving_us as f64 / 3_600_000_000.0 / days,
    }
}

pub fn run(s: &Scenario, m: &mut Metrics) -> Result<(), ScenarioError> {
    let horizon = us(s.duration_s.unwrap_or(DEFAULT_LPWAN_DURATION_S));
    let energy = s.energy.unwrap_or_default();
    let protocols = if s.protocols.is_empty() { ProtocolProfile::defaults() } else { s.protocols.clone() };
    let mut total = 0usize;
    let mut min_years = f64::INFINITY;
    let mut largest = 0usize;
    for d in &s.devices {
        let policy = d.policy.as_ref().ok_or_else(|| run_err(format!("{}: no messaging policy", d.id)))?;
        let trace = motion_trace(d);
        let sends = next_transmissions(policy, &trace, horizon).map_err(run_err)?;
        for t in &sends {
            m.row("schedule", &[d.id.clone(), t.at_us.to_string(), t.reason.to_string()]);
        }
        let profile = profile_from_trace(&trace, horizon);
        let per_day = policy.messages_per_day(&profile);
        let days = estimate_lifetime(policy, &energy, &profile).map_err(run_err)?;
        let years = days_to_years(days);
        let kind = match policy {
            iiot_core::lowpower::MessagingPolicy::FixedDaily { .. } => "FIXED_DAILY",
            iiot_core::lowpower::MessagingPolicy::MotionAdaptive { .. } => "MOTION_ADAPTIVE",
        };
        m.row(
            "lifetime",
            &[d.id.clone(), kind.into(), format!("{per_day:.4}"), days.to_string(), format!("{years:.3}")],
        );
        m.metric(&format!("sends[{}]", d.id), sends.len());
        m.metric(&format!("messages_per_day[{}]", d.id), format!("{per_day:.4}"));
        m.metric(&format!("lifetime_days[{}]", d.id), days);
        m.metric(&format!("lifetime_years[{}]", d.id), format!("{years:.3}"));
        let ok = payload_check(policy, d.payload_bytes as usize) == PayloadCheck::Ok;
        m.metric(&format!("payload_ok[{}]", d.id), u8::from(ok));
        total += sends.len();
        min_years = min_years.min(years);
        largest = largest.max(d.payload_bytes as usize);
    }
    m.metric("devices", s.devices.len());
    m.metric("sends_total", total);
    m.metric("min_lifetime_years", format!("{:.3}", if min_years.is_finite() { min_years } else { 0.0 }));
    for p in &protocols {
        m.metric(&format!("airtime_us[{}]", p.name), p.airtime_us(largest));
    }
    Ok(())
}
