//! Transmission schedules for the messaging policies.
//!
//! Motion-adaptive timer rule: the cadence timer restarts at every send and
//! at every change of motion state. Cadence sends that fall due before a
//! state change are sent first. A cadence send due exactly at a change is
//! sent too, except on departure with `send_on_motion_start`, where the
//! departure message takes its place.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{LowPowerError, MessagingPolicy, DAY_US};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MotionState {
    Stationary,
    Moving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SendReason {
    Cadence,
    MotionStart,
}

impl fmt::Display for SendReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SendReason::Cadence => "CADENCE",
            SendReason::MotionStart => "MOTION_START",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transmission {
    pub at_us: u64,
    pub reason: SendReason,
}

/// Send times in `(0, horizon_us]` (a departure at 0 sends at 0). Devices
/// start stationary at time 0.
pub fn next_transmissions(
    policy: &MessagingPolicy,
    motion_trace: &[(u64, MotionState)],
    horizon_us: u64,
) -> Result<Vec<Transmission>, LowPowerError> {
    policy.validate()?;
    if let Some(i) = motion_trace.windows(2).position(|w| w[1].0 < w[0].0) {
        return Err(LowPowerError::UnorderedTrace(i + 1));
    }
    let mut out = Vec::new();
    match *policy {
        MessagingPolicy::FixedDaily { messages_per_day, .. } => {
            if messages_per_day == 0 {
                return Ok(out);
            }
            let n = u64::from(messages_per_day);
            for k in 1.. {
                let at_us = k * DAY_US / n;
                if at_us > horizon_us {
                    break;
                }
                out.push(Transmission {
                    at_us,
                    reason: SendReason::Cadence,
                });
            }
        }
        MessagingPolicy::MotionAdaptive {
            stationary_interval_us,
            moving_interval_us,
            send_on_motion_start,
            ..
        } => {
            let interval = |s: MotionState| match s {
                MotionState::Stationary => stationary_interval_us,
                MotionState::Moving => moving_interval_us,
            };
            let mut state = MotionState::Stationary;
            let mut timer_from = 0u64;
            let cadence_until = |out: &mut Vec<Transmission>, timer_from: &mut u64, state, limit: u64, inclusive: bool| {
                loop {
                    let due = *timer_from + interval(state);
                    if due > horizon_us || due > limit || (!inclusive && due == limit) {
                        break;
                    }
                    out.push(Transmission {
                        at_us: due,
                        reason: SendReason::Cadence,
                    });
                    *timer_from = due;
                }
            };
            for &(t, next) in motion_trace {
                if t > horizon_us {
                    break;
                }
                if next == state {
                    continue;
                }
                let departure_send = next == MotionState::Moving && send_on_motion_start;
                cadence_until(&mut out, &mut timer_from, state, t, !departure_send);
                if departure_send {
                    out.push(Transmission {
                        at_us: t,
                        reason: SendReason::MotionStart,
                    });
                }
                state = next;
                timer_from = t;
            }
            cadence_until(&mut out, &mut timer_from, state, horizon_us, true);
        }
    }
    Ok(out)
}

/// `device_id,send_time_us,reason` rows with a header line.
pub fn schedule_csv(device_id: &str, sends: &[Transmission]) -> String {
    let mut s = String::from("device_id,send_time_us,reason\n");
    for t in sends {
        s.push_str(&format!("{device_id},{},{}\n", t.at_us, t.reason));
    }
    s
}
