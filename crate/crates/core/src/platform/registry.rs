//! Device registry and lifecycle state machine.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::PlatformError;
use crate::model::Origin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Lifecycle {
    Registered,
    Provisioned,
    Active,
    Updating,
    Decommissioned,
}

impl Lifecycle {
    /// REGISTERED → PROVISIONED → ACTIVE ⇄ UPDATING, ACTIVE → DECOMMISSIONED.
    pub fn can_transition_to(self, target: Lifecycle) -> bool {
        use Lifecycle::*;
        matches!(
            (self, target),
            (Registered, Provisioned)
                | (Provisioned, Active)
                | (Active, Updating)
                | (Updating, Active)
                | (Active, Decommissioned)
        )
    }
}

impl fmt::Display for Lifecycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lifecycle::Registered => "REGISTERED",
            Lifecycle::Provisioned => "PROVISIONED",
            Lifecycle::Active => "ACTIVE",
            Lifecycle::Updating => "UPDATING",
            Lifecycle::Decommissioned => "DECOMMISSIONED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorSpec {
    pub sensor_id: String,
    pub unit: String,
    pub expected_period_ms: u64,
}

impl SensorSpec {
    pub fn new(sensor_id: impl Into<String>, unit: impl Into<String>, expected_period_ms: u64) -> Self {
        SensorSpec {
            sensor_id: sensor_id.into(),
            unit: unit.into(),
            expected_period_ms,
        }
    }
}

/// What a caller supplies to register a device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceDescriptor {
    pub device_id: String,
    pub sensors: Vec<SensorSpec>,
    pub pattern: Origin,
    pub metadata: BTreeMap<String, String>,
}

impl DeviceDescriptor {
    pub fn new(device_id: impl Into<String>, pattern: Origin, sensors: Vec<SensorSpec>) -> Self {
        DeviceDescriptor {
            device_id: device_id.into(),
            sensors,
            pattern,
            metadata: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceRecord {
    pub device_id: String,
    pub tenant_id: String,
    pub lifecycle: Lifecycle,
    pub sensors: Vec<SensorSpec>,
    pub pattern: Origin,
    pub metadata: BTreeMap<String, String>,
}

impl DeviceRecord {
    pub fn sensor(&self, sensor_id: &str) -> Option<&SensorSpec> {
        self.sensors.iter().find(|s| s.sensor_id == sensor_id)
    }
}

#[derive(Debug, Clone, Default)]
pub struct DeviceRegistry {
    devices: BTreeMap<String, DeviceRecord>,
}

impl DeviceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers the device in state REGISTERED. Tenant existence is checked
    /// by the caller.
    pub fn register(&mut self, tenant_id: &str, descriptor: DeviceDescriptor) -> Result<String, PlatformError> {
        let DeviceDescriptor {
            device_id,
            sensors,
            pattern,
            metadata,
        } = descriptor;
        if device_id.is_empty() || device_id.contains(['|', '\n']) {
            return Err(PlatformError::InvalidId(device_id));
        }
        if self.devices.contains_key(&device_id) {
            return Err(PlatformError::DuplicateDevice(device_id));
        }
        let mut seen = BTreeSet::new();
        for s in &sensors {
            if !seen.insert(s.sensor_id.as_str()) {
                return Err(PlatformError::DuplicateSensor {
                    device_id,
                    sensor_id: s.sensor_id.clone(),
                });
            }
        }
        self.devices.insert(
            device_id.clone(),
            DeviceRecord {
                device_id: device_id.clone(),
                tenant_id: tenant_id.to_string(),
                lifecycle: Lifecycle::Registered,
                sensors,
                pattern,
                metadata,
            },
        );
        Ok(device_id)
    }

    pub fn advance_lifecycle(&mut self, device_id: &str, target: Lifecycle) -> Result<Lifecycle, PlatformError> {
        let rec = self
            .devices
            .get_mut(device_id)
            .ok_or_else(|| PlatformError::UnknownDevice(device_id.to_string()))?;
        if !rec.lifecycle.can_transition_to(target) {
            return Err(PlatformError::IllegalTransition {
                device_id: device_id.to_string(),
                from: rec.lifecycle,
                to: target,
            });
        }
        rec.lifecycle = target;
        Ok(target)
    }

    /// Walks REGISTERED → PROVISIONED → ACTIVE.
    pub fn activate(&mut self, device_id: &str) -> Result<Lifecycle, PlatformError> {
        self.advance_lifecycle(device_id, Lifecycle::Provisioned)?;
        self.advance_lifecycle(device_id, Lifecycle::Active)
    }

    pub fn get(&self, device_id: &str) -> Option<&DeviceRecord> {
        self.devices.get(device_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &DeviceRecord> {
        self.devices.values()
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }
}
