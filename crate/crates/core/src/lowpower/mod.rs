//! Battery-powered LPWAN endpoints: when they transmit, how much payload
//! they may send, and how long the battery lasts.
//!
//! Energy units are abstract; only ratios between budget, idle drain and
//! per-message cost matter.

mod schedule;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use schedule::{next_transmissions, schedule_csv, MotionState, SendReason, Transmission};

pub const DAY_US: u64 = 86_400_000_000;
pub const DAYS_PER_YEAR: f64 = 365.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LowPowerError {
    #[error("motion trace goes back in time at index {0}")]
    UnorderedTrace(usize),
    #[error("drain per day is zero: lifetime is unbounded")]
    ZeroDrain,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid energy model: {0}")]
    InvalidEnergy(String),
    #[error("invalid protocol profile: {0}")]
    InvalidProtocol(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessagingPolicy {
    FixedDaily {
        messages_per_day: u32,
        max_payload_bytes: u32,
    },
    MotionAdaptive {
        stationary_interval_us: u64,
        moving_interval_us: u64,
        send_on_motion_start: bool,
        max_payload_bytes: u32,
    },
}

impl MessagingPolicy {
    /// One reading a day in under 100 bytes.
    pub fn water_meter() -> Self {
        MessagingPolicy::FixedDaily {
            messages_per_day: 1,
            max_payload_bytes: 99,
        }
    }

    /// Every 12 h at rest, immediately on departure, every 15 min en route.
    pub fn freight_wagon() -> Self {
        MessagingPolicy::MotionAdaptive {
            stationary_interval_us: 12 * 3_600_000_000,
            moving_interval_us: 15 * 60_000_000,
            send_on_motion_start: true,
            max_payload_bytes: 99,
        }
    }

    pub fn max_payload_bytes(&self) -> u32 {
        match self {
            MessagingPolicy::FixedDaily { max_payload_bytes, .. }
            | MessagingPolicy::MotionAdaptive { max_payload_bytes, .. } => *max_payload_bytes,
        }
    }

    pub fn validate(&self) -> Result<(), LowPowerError> {
        if self.max_payload_bytes() < 1 {
            return Err(LowPowerError::InvalidPolicy("max_payload_bytes must be at least 1".into()));
        }
        if let MessagingPolicy::MotionAdaptive {
            stationary_interval_us,
            moving_interval_us,
            ..
        } = self
        {
            if *stationary_interval_us == 0 || *moving_interval_us == 0 {
                return Err(LowPowerError::InvalidPolicy("intervals must be positive".into()));
            }
        }
        Ok(())
    }

    /// Average messages per day under `profile`.
    pub fn messages_per_day(&self, profile: &MotionProfile) -> f64 {
        match *self {
            MessagingPolicy::FixedDaily { messages_per_day, .. } => f64::from(messages_per_day),
            MessagingPolicy::MotionAdaptive {
                stationary_interval_us,
                moving_interval_us,
                send_on_motion_start,
                ..
            } => {
                let moving_us = profile.moving_hours_per_day.clamp(0.0, 24.0) * 3_600_000_000.0;
                let resting_us = DAY_US as f64 - moving_us;
                let starts = if send_on_motion_start { profile.trips_per_day } else { 0.0 };
                starts + moving_us / moving_interval_us as f64 + resting_us / stationary_interval_us as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadCheck {
    Ok,
    TooLarge { limit: u32, actual: usize },
}

pub fn payload_check(policy: &MessagingPolicy, message_bytes: usize) -> PayloadCheck {
    let limit = policy.max_payload_bytes();
    if message_bytes <= limit as usize {
        PayloadCheck::Ok
    } else {
        PayloadCheck::TooLarge {
            limit,
            actual: message_bytes,
        }
    }
}

/// Long-run average movement of a device.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionProfile {
    pub trips_per_day: f64,
    pub moving_hours_per_day: f64,
}

impl MotionProfile {
    pub fn stationary() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub battery_budget: f64,
    pub per_message_cost: f64,
    pub idle_cost_per_day: f64,
}

impl Default for EnergyModel {
    /// Calibrated so a one-message-a-day meter lasts 1825 days.
    fn default() -> Self {
        EnergyModel {
            battery_budget: 18_250.0,
            per_message_cost: 8.0,
            idle_cost_per_day: 2.0,
        }
    }
}

impl EnergyModel {
    pub fn validate(&self) -> Result<(), LowPowerError> {
        let finite = [self.battery_budget, self.per_message_cost, self.idle_cost_per_day]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.per_message_cost < 0.0 || self.idle_cost_per_day < 0.0 {
            return Err(LowPowerError::InvalidEnergy("costs must be finite and non-negative".into()));
        }
        if self.battery_budget <= 0.0 {
            return Err(LowPowerError::InvalidEnergy("battery budget must be positive".into()));
        }
        Ok(())
    }
}

/// Whole days until the budget is spent at `messages_per_day`.
pub fn lifetime_days(energy: &EnergyModel, messages_per_day: f64) -> Result<u64, LowPowerError> {
    energy.validate()?;
    let drain = energy.idle_cost_per_day + messages_per_day * energy.per_message_cost;
    if drain <= 0.0 {
        return Err(LowPowerError::ZeroDrain);
    }
    Ok((energy.battery_budget / drain).floor() as u64)
}

pub fn estimate_lifetime(
    policy: &MessagingPolicy,
    energy: &EnergyModel,
    profile: &MotionProfile,
) -> Result<u64, LowPowerError> {
    policy.validate()?;
    lifetime_days(energy, policy.messages_per_day(profile))
}

pub fn days_to_years(days: u64) -> f64 {
    days as f64 / DAYS_PER_YEAR
}

/// A point on the range-vs-bandwidth trade-off. The shipped values are
/// editable defaults, not measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolProfile {
    pub name: String,
    pub range_km: f64,
    pub bandwidth_bytes_per_s: f64,
    pub per_message_overhead_bytes: u32,
}

impl ProtocolProfile {
    pub fn validate(&self) -> Result<(), LowPowerError> {
        if !(self.range_km > 0.0 && self.bandwidth_bytes_per_s > 0.0) {
            return Err(LowPowerError::InvalidProtocol(format!(
                "{}: range and bandwidth must be positive",
                self.name
            )));
        }
        Ok(())
    }

    /// Time on air for one message with `payload` bytes.
    pub fn airtime_us(&self, payload: usize) -> u64 {
        let bytes = payload as f64 + f64::from(self.per_message_overhead_bytes);
        (bytes / self.bandwidth_bytes_per_s * 1e6).ceil() as u64
    }

    pub fn defaults() -> Vec<ProtocolProfile> {
        let p = |name: &str, range_km, bw, overhead| ProtocolProfile {
            name: name.into(),
            range_km,
            bandwidth_bytes_per_s: bw,
            per_message_overhead_bytes: overhead,
        };
        vec![
            p("LoRa-like", 10.0, 600.0, 13),
            p("NB-IoT-like", 8.0, 3_000.0, 40),
            p("WiFi-like", 0.05, 6_000_000.0, 60),
        ]
    }
}
