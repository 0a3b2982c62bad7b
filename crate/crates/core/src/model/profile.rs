//! Plant size classes and the edge-analytics latency budget.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantProfile {
    pub size_class: SizeClass,
    pub sensor_count: u64,
    pub control_system_count: u64,
    pub gateway_count: u64,
    pub daily_data_gb: f64,
}

/// Admissible interval for one plant field; `None` means unbounded.
/// Bounds are inclusive unless the matching `*_strict` flag is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lower: Option<f64>,
    pub lower_strict: bool,
    pub upper: Option<f64>,
    pub upper_strict: bool,
}

impl Band {
    const fn below(upper: f64) -> Band {
        Band {
            lower: None,
            lower_strict: false,
            upper: Some(upper),
            upper_strict: true,
        }
    }

    const fn between(lower: f64, upper: f64) -> Band {
        Band {
            lower: Some(lower),
            lower_strict: false,
            upper: Some(upper),
            upper_strict: false,
        }
    }

    const fn above(lower: f64) -> Band {
        Band {
            lower: Some(lower),
            lower_strict: true,
            upper: None,
            upper_strict: false,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        let lower_ok = match self.lower {
            None => true,
            Some(l) if self.lower_strict => v > l,
            Some(l) => v >= l,
        };
        let upper_ok = match self.upper {
            None => true,
            Some(u) if self.upper_strict => v < u,
            Some(u) => v <= u,
        };
        lower_ok && upper_ok
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.lower, self.upper) {
            (None, Some(u)) => write!(f, "< {u}"),
            (Some(l), None) => write!(f, "> {l}"),
            (Some(l), Some(u)) => write!(f, "{l} .. {u}"),
            (None, None) => f.write_str("any"),
        }
    }
}

/// Per-class bands: sensors, control systems, gateways, GB/day.
pub fn size_class_bands(class: SizeClass) -> [(&'static str, Band); 4] {
    match class {
        SizeClass::Small => [
            ("sensor_count", Band::below(50_000.0)),
            ("control_system_count", Band::below(2_000.0)),
            ("gateway_count", Band::below(50.0)),
            ("daily_data_gb", Band::below(200.0)),
        ],
        SizeClass::Medium => [
            ("sensor_count", Band::between(50_000.0, 80_000.0)),
            ("control_system_count", Band::between(2_000.0, 4_000.0)),
            ("gateway_count", Band::between(50.0, 100.0)),
            ("daily_data_gb", Band::between(200.0, 300.0)),
        ],
        SizeClass::Large => [
            ("sensor_count", Band::above(80_000.0)),
            ("control_system_count", Band::above(4_000.0)),
            ("gateway_count", Band::above(100.0)),
            ("daily_data_gb", Band::above(300.0)),
        ],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileViolation {
    pub field: &'static str,
    pub value: f64,
    pub band: Band,
}

impl fmt::Display for ProfileViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} outside band {}", self.field, self.value, self.band)
    }
}

/// Returns the fields of `p` that fall outside the bands of its size class.
pub fn validate_plant_profile(p: &PlantProfile) -> Vec<ProfileViolation> {
    let values = [
        p.sensor_count as f64,
        p.control_system_count as f64,
        p.gateway_count as f64,
        p.daily_data_gb,
    ];
    size_class_bands(p.size_class)
        .into_iter()
        .zip(values)
        .filter(|((_, band), v)| !band.contains(*v))
        .map(|((field, band), value)| ProfileViolation { field, value, band })
        .collect()
}

impl PlantProfile {
    /// Sustained north-bound data rate implied by `daily_data_gb` (1 GB = 10^9 bytes).
    pub fn bytes_per_second(&self) -> f64 {
        self.daily_data_gb * 1e9 / 86_400.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyBudget {
    pub duty_cycle_ms: (u32, u32),
    pub reaction_deadline_ms: u32,
    pub uplink_interval_ms: u32,
}

impl Default for LatencyBudget {
    fn default() -> Self {
        LatencyBudget {
            duty_cycle_ms: (4, 20),
            reaction_deadline_ms: 500,
            uplink_interval_ms: 200,
        }
    }
}

impl LatencyBudget {
    pub fn validate(&self) -> Result<(), ModelError> {
        let (lo, hi) = self.duty_cycle_ms;
        if lo == 0 || lo > hi {
            return Err(ModelError::InvalidBudget(format!(
                "duty cycle range {lo}..{hi} ms is empty"
            )));
        }
        if self.uplink_interval_ms == 0 || self.reaction_deadline_ms <= self.uplink_interval_ms {
            return Err(ModelError::InvalidBudget(format!(
                "need reaction deadline {} ms > uplink interval {} ms > 0",
                self.reaction_deadline_ms, self.uplink_interval_ms
            )));
        }
        Ok(())
    }

    pub fn reaction_deadline_us(&self) -> u64 {
        u64::from(self.reaction_deadline_ms) * 1_000
    }

    pub fn uplink_interval_us(&self) -> u64 {
        u64::from(self.uplink_interval_ms) * 1_000
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(class: SizeClass, s: u64, c: u64, g: u64, gb: f64) -> PlantProfile {
        PlantProfile {
            size_class: class,
            sensor_count: s,
            control_system_count: c,
            gateway_count: g,
            daily_data_gb: gb,
        }
    }

    #[test]
    fn medium_in_band() {
        let p = profile(SizeClass::Medium, 60_000, 3_000, 75, 250.0);
        assert!(validate_plant_profile(&p).is_empty());
    }

    #[test]
    fn small_upper_bound_is_strict() {
        let p = profile(SizeClass::Small, 50_000, 1_000, 10, 100.0);
        let v = validate_plant_profile(&p);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "sensor_count");
        assert!(validate_plant_profile(&profile(SizeClass::Small, 49_999, 1_999, 49, 199.9)).is_empty());
    }

    #[test]
    fn large_just_above_bounds() {
        let p = profile(SizeClass::Large, 80_001, 4_001, 101, 301.0);
        assert!(validate_plant_profile(&p).is_empty());
        let p = profile(SizeClass::Large, 80_000, 4_000, 100, 300.0);
        assert_eq!(validate_plant_profile(&p).len(), 4);
    }

    #[test]
    fn medium_bounds_inclusive() {
        assert!(validate_plant_profile(&profile(SizeClass::Medium, 50_000, 2_000, 50, 200.0)).is_empty());
        assert!(validate_plant_profile(&profile(SizeClass::Medium, 80_000, 4_000, 100, 300.0)).is_empty());
        assert_eq!(validate_plant_profile(&profile(SizeClass::Medium, 80_001, 1_999, 75, 250.0)).len(), 2);
    }

    #[test]
    fn validation_is_pure() {
        let p = profile(SizeClass::Small, 70_000, 5, 500, 10.0);
        assert_eq!(validate_plant_profile(&p), validate_plant_profile(&p));
    }

    #[test]
    fn small_plant_rate() {
        let p = profile(SizeClass::Small, 40_000, 1_000, 40, 200.0);
        let rate = p.bytes_per_second();
        assert!((rate - 2_314_814.8).abs() < 1.0, "{rate}");
    }

    #[test]
    fn budget_defaults_and_invariant() {
        let b = LatencyBudget::default();
        b.validate().unwrap();
        assert_eq!(b.reaction_deadline_us(), 500_000);
        assert_eq!(b.uplink_interval_us(), 200_000);
        let bad = LatencyBudget {
            reaction_deadline_ms: 200,
            ..b
        };
        assert!(bad.validate().is_err());
    }
}
