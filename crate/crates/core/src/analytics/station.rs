//! Paint station: robots sampling at their duty cycle, and the station
//! controller that condenses them into one uplink message per interval.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AnalyticsError;
use crate::model::{Measurement, Origin};

pub const NOZZLE_PRESSURE: &str = "nozzle_pressure";
pub const PAINT_FLOW: &str = "paint_flow";
pub const SENSORS: [&str; 2] = [NOZZLE_PRESSURE, PAINT_FLOW];
pub const ROBOT_COUNT_RANGE: std::ops::RangeInclusive<usize> = 6..=12;

/// Duty-cycle periods in [4, 20] ms that divide the 200 ms uplink interval,
/// so a fresh sample exists at every controller tick.
pub const ALIGNED_DUTY_CYCLES_MS: [u64; 5] = [4, 5, 8, 10, 20];

/// Nominal level, noise half-width and fault level per sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalModel {
    pub pressure_nominal: f64,
    pub pressure_noise: f64,
    pub pressure_fault: f64,
    pub flow_nominal: f64,
    pub flow_noise: f64,
    pub flow_fault: f64,
}

impl Default for SignalModel {
    fn default() -> Self {
        SignalModel {
            pressure_nominal: 4.0,
            pressure_noise: 0.1,
            pressure_fault: 1.0,
            flow_nominal: 250.0,
            flow_noise: 5.0,
            flow_fault: 120.0,
        }
    }
}

impl SignalModel {
    fn unit(sensor: usize) -> &'static str {
        if sensor == 0 {
            "bar"
        } else {
            "ml/min"
        }
    }

    fn level(&self, sensor: usize, faulty: bool, noise: f64) -> f64 {
        let (nominal, amp, fault) = if sensor == 0 {
            (self.pressure_nominal, self.pressure_noise, self.pressure_fault)
        } else {
            (self.flow_nominal, self.flow_noise, self.flow_fault)
        };
        (if faulty { fault } else { nominal }) + amp * noise
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Robot {
    pub robot_id: String,
    pub duty_cycle_us: u64,
    /// Fault intervals `[since, until)`; `until` is `None` while unrepaired.
    faults: Vec<(u64, Option<u64>)>,
}

impl Robot {
    pub fn is_faulty_at(&self, t_us: u64) -> bool {
        self.faults
            .iter()
            .any(|&(since, until)| since <= t_us && until.is_none_or(|u| t_us < u))
    }

    pub fn has_open_fault(&self) -> bool {
        self.faults.last().is_some_and(|(_, until)| until.is_none())
    }

    /// Time of the newest sample taken at or before `t_us`.
    pub fn last_sample_time(&self, t_us: u64) -> u64 {
        t_us / self.duty_cycle_us * self.duty_cycle_us
    }
}

#[derive(Debug, Clone)]
pub struct PaintStation {
    pub station_id: String,
    pub tenant_id: String,
    pub robots: Vec<Robot>,
    pub signal: SignalModel,
    seed: u64,
}

impl PaintStation {
    pub fn new(
        station_id: impl Into<String>,
        tenant_id: impl Into<String>,
        duty_cycles_us: &[u64],
        signal: SignalModel,
        seed: u64,
    ) -> Result<Self, AnalyticsError> {
        if !ROBOT_COUNT_RANGE.contains(&duty_cycles_us.len()) {
            return Err(AnalyticsError::RobotCount(duty_cycles_us.len()));
        }
        if let Some(&bad) = duty_cycles_us.iter().find(|&&d| !(4_000..=20_000).contains(&d)) {
            return Err(AnalyticsError::DutyCycle(bad));
        }
        let station_id = station_id.into();
        let robots = duty_cycles_us
            .iter()
            .enumerate()
            .map(|(i, &d)| Robot {
                robot_id: format!("{station_id}-robot{:02}", i + 1),
                duty_cycle_us: d,
                faults: Vec::new(),
            })
            .collect();
        Ok(PaintStation {
            station_id,
            tenant_id: tenant_id.into(),
            robots,
            signal,
            seed,
        })
    }

    /// Picks one aligned duty cycle per robot from the seed.
    pub fn seeded_duty_cycles_us(robot_count: usize, seed: u64) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d071);
        (0..robot_count)
            .map(|_| ALIGNED_DUTY_CYCLES_MS[rng.gen_range(0..ALIGNED_DUTY_CYCLES_MS.len())] * 1_000)
            .collect()
    }

    pub fn robot_index(&self, robot_id: &str) -> Option<usize> {
        self.robots.iter().position(|r| r.robot_id == robot_id)
    }

    pub fn inject_fault(&mut self, robot: usize, at_us: u64) {
        let r = &mut self.robots[robot];
        if !r.has_open_fault() {
            r.faults.push((at_us, None));
        }
    }

    pub fn repair(&mut self, robot: usize, at_us: u64) {
        if let Some(last) = self.robots[robot].faults.last_mut() {
            if last.1.is_none() {
                last.1 = Some(at_us.max(last.0));
            }
        }
    }

    /// Noise in [-1, 1) for the k-th sample of one robot sensor. Each sample
    /// has its own position in a keyed ChaCha stream, so any sample can be
    /// regenerated without replaying the ones before it.
    fn noise(&self, robot: usize, sensor: usize, k: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((robot * SENSORS.len() + sensor) as u64);
        rng.set_word_pos(u128::from(k) * 2);
        let bits = rng.next_u64() >> 11;
        (bits as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    /// The sample robot `robot` takes at `t_us`, which must be a multiple
    /// of its duty cycle.
    pub fn sample(&self, robot: usize, sensor: usize, t_us: u64) -> f64 {
        let r = &self.robots[robot];
        debug_assert_eq!(t_us % r.duty_cycle_us, 0);
        let k = t_us / r.duty_cycle_us;
        self.signal.level(sensor, r.is_faulty_at(t_us), self.noise(robot, sensor, k))
    }

    /// Every sample of one robot sensor in `[0, until_us]`.
    pub fn full_rate_trace(&self, robot: usize, sensor: usize, until_us: u64) -> Vec<(u64, f64)> {
        let d = self.robots[robot].duty_cycle_us;
        (0..=until_us / d).map(|k| (k * d, self.sample(robot, sensor, k * d))).collect()
    }

    /// The controller's uplink message at `now_us`: the latest sample of
    /// every robot sensor, robot-major.
    pub fn controller_tick(&self, now_us: u64) -> Vec<Measurement> {
        let mut out = Vec::with_capacity(self.robots.len() * SENSORS.len());
        for (i, r) in self.robots.iter().enumerate() {
            let t = r.last_sample_time(now_us);
            for (s, sensor) in SENSORS.iter().enumerate() {
                out.push(Measurement {
                    tenant_id: self.tenant_id.clone(),
                    device_id: r.robot_id.clone(),
                    sensor_id: (*sensor).to_string(),
                    timestamp_us: t,
                    value: self.sample(i, s, t),
                    unit: SignalModel::unit(s).to_string(),
                    origin: Origin::Native,
                });
            }
        }
        out
    }
}
