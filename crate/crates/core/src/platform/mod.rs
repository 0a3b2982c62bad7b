//! The IoT platform as middleware: tenants, device lifecycle, data
//! management with retention, and smart rules.

mod registry;
mod rules;
mod store;
mod tenancy;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::lambda::LambdaPipeline;
use crate::model::Measurement;

pub use registry::{DeviceDescriptor, DeviceRecord, DeviceRegistry, Lifecycle, SensorSpec};
pub use rules::{Comparison, Condition, FiredAction, RuleAction, RulePredicate, SmartRule};
pub use store::{DirSink, HotStore, LakeSink, MemorySink, SharedMemorySink, StreamKey};
pub use tenancy::{DataScope, Grant, Tenant, TenantForest};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlatformError {
    #[error("parent tenant {0} not found")]
    ParentNotFound(String),
    #[error("parent tenant {0} cannot host sub-tenants")]
    ParentNotCapable(String),
    #[error("app {app} is not offered by parent {parent}")]
    AppNotOffered { app: String, parent: String },
    #[error("duplicate tenant {0}")]
    DuplicateTenant(String),
    #[error("unknown tenant {0}")]
    UnknownTenant(String),
    #[error("tenant cannot grant to itself: {0}")]
    SelfGrant(String),
    #[error("invalid id {0:?}")]
    InvalidId(String),
    #[error("unknown device {0}")]
    UnknownDevice(String),
    #[error("duplicate device {0}")]
    DuplicateDevice(String),
    #[error("duplicate sensor {sensor_id} on {device_id}")]
    DuplicateSensor { device_id: String, sensor_id: String },
    #[error("illegal transition of {device_id}: {from} -> {to}")]
    IllegalTransition {
        device_id: String,
        from: Lifecycle,
        to: Lifecycle,
    },
    #[error("duplicate rule {0}")]
    DuplicateRule(String),
    #[error("unknown rule {0}")]
    UnknownRule(String),
    #[error("rule {rule_id} references sensor {sensor_id} not visible to {tenant_id}")]
    RuleNotVisible {
        rule_id: String,
        tenant_id: String,
        sensor_id: String,
    },
    #[error("rule {0} has an empty window")]
    EmptyWindow(String),
    #[error("no retention policy configured")]
    NoRetentionPolicy,
    #[error("retention hot window must be positive")]
    InvalidRetention,
    #[error("data-lake sink unavailable: {0}")]
    SinkUnavailable(String),
}

/// Why a measurement was not accepted.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("unknown device {0}")]
    UnknownDevice(String),
    #[error("device {device_id} is {state}, not ACTIVE")]
    InactiveDevice { device_id: String, state: Lifecycle },
    #[error("device {device_id} belongs to {owner}, not {claimed}")]
    TenantMismatch {
        device_id: String,
        claimed: String,
        owner: String,
    },
    #[error("sensor {sensor_id} not declared on {device_id}")]
    UnknownSensor { device_id: String, sensor_id: String },
}

impl IngestError {
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::UnknownDevice(_) => "UNKNOWN_DEVICE",
            IngestError::InactiveDevice { .. } => "INACTIVE_DEVICE",
            IngestError::TenantMismatch { .. } => "TENANT_MISMATCH",
            IngestError::UnknownSensor { .. } => "UNKNOWN_SENSOR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetentionPolicy {
    pub hot_window_us: u64,
    pub offload_sink: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestCounters {
    pub submitted: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub offloaded: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReceipt {
    /// Platform-wide acceptance sequence number, starting at 1.
    pub seq: u64,
    pub fired: Vec<FiredAction>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryFilter {
    /// Only data owned by this tenant.
    pub owner: Option<String>,
    pub device_id: Option<String>,
    pub sensor_id: Option<String>,
    pub from_us: Option<u64>,
    /// Exclusive upper bound.
    pub to_us: Option<u64>,
}

impl QueryFilter {
    pub fn all() -> Self {
        Self::default()
    }

    fn matches_stream(&self, key: &StreamKey) -> bool {
        self.owner.as_ref().is_none_or(|o| *o == key.tenant_id)
            && self.device_id.as_ref().is_none_or(|d| *d == key.device_id)
            && self.sensor_id.as_ref().is_none_or(|s| *s == key.sensor_id)
    }

    fn matches_time(&self, ts: u64) -> bool {
        self.from_us.is_none_or(|f| ts >= f) && self.to_us.is_none_or(|t| ts < t)
    }
}

pub struct Platform {
    tenants: TenantForest,
    devices: DeviceRegistry,
    rules: BTreeMap<String, SmartRule>,
    window_cap: usize,
    windows: BTreeMap<StreamKey, VecDeque<(u64, f64)>>,
    hot: HotStore,
    retention: Option<RetentionPolicy>,
    sink: Option<Box<dyn LakeSink>>,
    lambda: Option<LambdaPipeline>,
    counters: BTreeMap<String, IngestCounters>,
    next_seq: u64,
}

impl Default for Platform {
    fn default() -> Self {
        Self::new()
    }
}

impl Platform {
    pub fn new() -> Self {
        Platform {
            tenants: TenantForest::new(),
            devices: DeviceRegistry::new(),
            rules: BTreeMap::new(),
            window_cap: 1,
            windows: BTreeMap::new(),
            hot: HotStore::default(),
            retention: None,
            sink: None,
            lambda: None,
            counters: BTreeMap::new(),
            next_seq: 1,
        }
    }

    pub fn tenants(&self) -> &TenantForest {
        &self.tenants
    }

    pub fn devices(&self) -> &DeviceRegistry {
        &self.devices
    }

    pub fn create_tenant<I, S>(
        &mut self,
        tenant_id: &str,
        parent: Option<&str>,
        multi_tenant_capable: bool,
        apps: I,
    ) -> Result<String, PlatformError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tenants
            .create_tenant(tenant_id, parent, multi_tenant_capable, apps)
    }

    pub fn grant(&mut self, owner: &str, grantee: &str, scope: DataScope) -> Result<(), PlatformError> {
        self.tenants.grant(owner, grantee, scope)
    }

    pub fn register_device(&mut self, tenant_id: &str, descriptor: DeviceDescriptor) -> Result<String, PlatformError> {
        self.tenants.require(tenant_id)?;
        self.devices.register(tenant_id, descriptor)
    }

    pub fn advance_lifecycle(&mut self, device_id: &str, target: Lifecycle) -> Result<Lifecycle, PlatformError> {
        self.devices.advance_lifecycle(device_id, target)
    }

    pub fn activate(&mut self, device_id: &str) -> Result<Lifecycle, PlatformError> {
        self.devices.activate(device_id)
    }

    /// Adds a rule after checking that its sensor is declared on some device
    /// whose data the rule's tenant may read.
    pub fn add_rule(&mut self, rule: SmartRule) -> Result<(), PlatformError> {
        self.tenants.require(&rule.tenant_id)?;
        if self.rules.contains_key(&rule.rule_id) {
            return Err(PlatformError::DuplicateRule(rule.rule_id));
        }
        let len = rule.predicate.condition.window_len();
        if len == 0 || (matches!(rule.predicate.condition, Condition::WindowTrend { .. }) && len < 2) {
            return Err(PlatformError::EmptyWindow(rule.rule_id));
        }
        let visible = self.devices.iter().any(|d| {
            rule.predicate.device_id.as_deref().is_none_or(|id| id == d.device_id)
                && d.sensor(&rule.predicate.sensor_id).is_some()
                && self
                    .tenants
                    .can_see(&rule.tenant_id, &d.tenant_id, &d.device_id, &rule.predicate.sensor_id)
        });
        if !visible {
            return Err(PlatformError::RuleNotVisible {
                rule_id: rule.rule_id,
                tenant_id: rule.tenant_id,
                sensor_id: rule.predicate.sensor_id,
            });
        }
        self.window_cap = self.window_cap.max(len);
        self.rules.insert(rule.rule_id.clone(), rule);
        Ok(())
    }

    pub fn set_rule_enabled(&mut self, rule_id: &str, enabled: bool) -> Result<(), PlatformError> {
        self.rules
            .get_mut(rule_id)
            .map(|r| r.enabled = enabled)
            .ok_or_else(|| PlatformError::UnknownRule(rule_id.to_string()))
    }

    pub fn rules(&self) -> impl Iterator<Item = &SmartRule> {
        self.rules.values()
    }

    pub fn set_retention(&mut self, policy: RetentionPolicy, sink: Box<dyn LakeSink>) -> Result<(), PlatformError> {
        if policy.hot_window_us == 0 {
            return Err(PlatformError::InvalidRetention);
        }
        self.retention = Some(policy);
        self.sink = Some(sink);
        Ok(())
    }

    /// Accepted measurements are forwarded to this pipeline (fork placed
    /// after the platform).
    pub fn attach_lambda(&mut self, pipeline: LambdaPipeline) {
        self.lambda = Some(pipeline);
    }

    pub fn lambda(&self) -> Option<&LambdaPipeline> {
        self.lambda.as_ref()
    }

    pub fn lambda_mut(&mut self) -> Option<&mut LambdaPipeline> {
        self.lambda.as_mut()
    }

    fn check_ingest(&self, m: &Measurement) -> Result<(), IngestError> {
        let dev = self
            .devices
            .get(&m.device_id)
            .ok_or_else(|| IngestError::UnknownDevice(m.device_id.clone()))?;
        if dev.tenant_id != m.tenant_id {
            return Err(IngestError::TenantMismatch {
                device_id: m.device_id.clone(),
                claimed: m.tenant_id.clone(),
                owner: dev.tenant_id.clone(),
            });
        }
        if dev.lifecycle != Lifecycle::Active {
            return Err(IngestError::InactiveDevice {
                device_id: m.device_id.clone(),
                state: dev.lifecycle,
            });
        }
        if dev.sensor(&m.sensor_id).is_none() {
            return Err(IngestError::UnknownSensor {
                device_id: m.device_id.clone(),
                sensor_id: m.sensor_id.clone(),
            });
        }
        Ok(())
    }

    /// Accepts the measurement iff its device exists, belongs to the claimed
    /// tenant, is ACTIVE and declares the sensor. Accepted data lands in the
    /// hot store, goes to the attached lambda fork, and is matched against
    /// the enabled rules of every tenant allowed to read it.
    pub fn ingest(&mut self, m: Measurement) -> Result<IngestReceipt, IngestError> {
        let counters = self.counters.entry(m.tenant_id.clone()).or_default();
        counters.submitted += 1;
        if let Err(e) = self.check_ingest(&m) {
            self.counters.get_mut(&m.tenant_id).expect("inserted").rejected += 1;
            return Err(e);
        }
        self.counters.get_mut(&m.tenant_id).expect("inserted").accepted += 1;
        let seq = self.next_seq;
        self.next_seq += 1;

        let key = StreamKey::of(&m);
        let window = self.windows.entry(key).or_default();
        let at = window.partition_point(|(t, _)| *t <= m.timestamp_us);
        window.insert(at, (m.timestamp_us, m.value));
        while window.len() > self.window_cap {
            window.pop_front();
        }

        if let Some(lambda) = self.lambda.as_mut() {
            lambda.fork_ingest(seq, m.clone());
        }

        let mut fired = self.evaluate_rules(&m.tenant_id, &m);
        for grantee in self.tenants.grantees_of(&m.tenant_id, &m.device_id, &m.sensor_id) {
            fired.extend(self.evaluate_rules(grantee, &m));
        }
        fired.sort_by(|a, b| a.rule_id().cmp(b.rule_id()));
        self.hot.insert(m);
        Ok(IngestReceipt { seq, fired })
    }

    /// Enabled rules of `tenant_id` whose predicate holds over the current
    /// window of `m`'s stream, in rule-id order.
    pub fn evaluate_rules(&self, tenant_id: &str, m: &Measurement) -> Vec<FiredAction> {
        let key = StreamKey::of(m);
        let window: Vec<(u64, f64)> = self
            .windows
            .get(&key)
            .map(|w| w.iter().copied().collect())
            .unwrap_or_default();
        if !self
            .tenants
            .can_see(tenant_id, &m.tenant_id, &m.device_id, &m.sensor_id)
        {
            return Vec::new();
        }
        self.rules
            .values()
            .filter(|r| r.enabled && r.tenant_id == tenant_id)
            .filter(|r| r.matches_stream(&m.device_id, &m.sensor_id))
            .filter(|r| r.predicate.condition.holds(&window))
            .map(|r| FiredAction::from_rule(r, m))
            .collect()
    }

    /// Hot-store measurements visible to `tenant_id` that match `filter`,
    /// ordered by stream then time.
    pub fn query(&self, tenant_id: &str, filter: &QueryFilter) -> Result<Vec<Measurement>, PlatformError> {
        self.tenants.require(tenant_id)?;
        let mut out = Vec::new();
        for (key, log) in self.hot.streams() {
            if !filter.matches_stream(key)
                || !self
                    .tenants
                    .can_see(tenant_id, &key.tenant_id, &key.device_id, &key.sensor_id)
            {
                continue;
            }
            out.extend(log.iter().filter(|m| filter.matches_time(m.timestamp_us)).cloned());
        }
        Ok(out)
    }

    /// Moves every hot measurement older than the hot window to the sink.
    /// A tenant whose batch the sink refuses keeps its data hot.
    pub fn retention_sweep(&mut self, now_us: u64) -> Result<usize, PlatformError> {
        let policy = self.retention.as_ref().ok_or(PlatformError::NoRetentionPolicy)?;
        let sink = self.sink.as_mut().ok_or(PlatformError::NoRetentionPolicy)?;
        let cutoff = now_us.saturating_sub(policy.hot_window_us);
        let mut moved = 0;
        for (tenant_id, batch) in self.hot.older_than(cutoff) {
            sink.append(&tenant_id, &batch)?;
            let removed = self.hot.evict_tenant(&tenant_id, cutoff);
            debug_assert_eq!(removed, batch.len());
            self.counters.entry(tenant_id).or_default().offloaded += removed as u64;
            moved += removed;
        }
        Ok(moved)
    }

    pub fn hot_len(&self) -> usize {
        self.hot.len()
    }

    pub fn hot_len_for(&self, tenant_id: &str) -> usize {
        self.hot.count_for_tenant(tenant_id)
    }

    pub fn counters(&self) -> &BTreeMap<String, IngestCounters> {
        &self.counters
    }

    pub fn totals(&self) -> IngestCounters {
        self.counters.values().fold(IngestCounters::default(), |acc, c| IngestCounters {
            submitted: acc.submitted + c.submitted,
            accepted: acc.accepted + c.accepted,
            rejected: acc.rejected + c.rejected,
            offloaded: acc.offloaded + c.offloaded,
        })
    }

    /// Tenants (by id) that own at least one registered device.
    pub fn device_owners(&self) -> BTreeSet<&str> {
        self.devices.iter().map(|d| d.tenant_id.as_str()).collect()
    }
}

#[cfg(test)]
mod tests;
