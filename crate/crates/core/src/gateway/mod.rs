//! IoT gateway: fieldbus-to-platform translation, centrally pushed rule
//! sets, and the seven ways an endpoint can be attached to the platform.

mod patterns;
mod ruleset;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{decode_fieldbus_frame, ConnectionPattern, Measurement, ModelError, Origin};
use crate::netsim::{EdgeTier, NetError, NodeId, SendOutcome, Simulator};

pub use patterns::{route_via_pattern, translating_tier, HwInterceptTap, RawReading, RouteContext, RouteProfile, Routed, TwoWireBus};
pub use ruleset::{translate, DeviceContext, TranslationRule, TranslationRuleSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("no rule for unit {unit_id} register {register}")]
    UnmappedRegister { unit_id: u8, register: u16 },
    #[error("rule set version {offered} is not newer than {current}")]
    StaleVersion { current: u64, offered: u64 },
    #[error("{pattern} needs a translation agent at {tier}")]
    MissingAgent { pattern: ConnectionPattern, tier: EdgeTier },
    #[error("duplicate rule for unit {unit_id} register {register}")]
    DuplicateRule { unit_id: u8, register: u16 },
    #[error("malformed rule set: {0}")]
    MalformedRuleset(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What a gateway did with one delivered payload.
#[derive(Debug, Clone, PartialEq)]
pub enum GatewayOutput {
    RulesetApplied { version: u64 },
    RulesetRejected(GatewayError),
    Forward(Measurement),
    Dropped(GatewayError),
}

/// Per-version accounting of translated frames.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GatewayAudit {
    pub translated_by_version: BTreeMap<u64, u64>,
    pub unmapped: u64,
    pub bad_frames: u64,
    pub frames_processed: u64,
}

impl GatewayAudit {
    pub fn translated(&self) -> u64 {
        self.translated_by_version.values().sum()
    }
}

/// Gateway state. It changes only when the owning simulation hands it a
/// delivered payload, so a rule-set swap happens at one virtual instant.
#[derive(Debug, Clone)]
pub struct Gateway {
    pub name: String,
    pub pattern: ConnectionPattern,
    ruleset: Option<TranslationRuleSet>,
    audit: GatewayAudit,
}

impl Gateway {
    pub fn new(name: impl Into<String>, pattern: ConnectionPattern) -> Self {
        Gateway {
            name: name.into(),
            pattern,
            ruleset: None,
            audit: GatewayAudit::default(),
        }
    }

    pub fn ruleset(&self) -> Option<&TranslationRuleSet> {
        self.ruleset.as_ref()
    }

    pub fn version(&self) -> u64 {
        self.ruleset.as_ref().map_or(0, |r| r.version)
    }

    pub fn audit(&self) -> &GatewayAudit {
        &self.audit
    }

    pub fn install_ruleset(&mut self, rules: TranslationRuleSet) -> Result<u64, GatewayError> {
        let current = self.version();
        if self.ruleset.is_some() && rules.version <= current {
            return Err(GatewayError::StaleVersion {
                current,
                offered: rules.version,
            });
        }
        let version = rules.version;
        self.ruleset = Some(rules);
        Ok(version)
    }

    /// Decodes and translates one raw frame with the rule set in force now.
    pub fn process_frame(&mut self, bytes: &[u8], now_us: u64, ctx: &DeviceContext) -> Result<Measurement, GatewayError> {
        self.audit.frames_processed += 1;
        let frame = match decode_fieldbus_frame(bytes) {
            Ok(f) => f,
            Err(e) => {
                self.audit.bad_frames += 1;
                return Err(e.into());
            }
        };
        let Some(rules) = self.ruleset.as_ref() else {
            self.audit.unmapped += 1;
            return Err(GatewayError::UnmappedRegister {
                unit_id: frame.unit_id,
                register: frame.register,
            });
        };
        match translate(&frame, rules, now_us, ctx, Origin::Via(self.pattern)) {
            Ok(m) => {
                *self.audit.translated_by_version.entry(rules.version).or_default() += 1;
                Ok(m)
            }
            Err(e) => {
                self.audit.unmapped += 1;
                Err(e)
            }
        }
    }

    /// Dispatches a delivered payload: rule-set documents are installed,
    /// anything else is treated as a fieldbus frame from `ctx`'s device.
    pub fn handle_payload(&mut self, payload: &[u8], now_us: u64, ctx: &DeviceContext) -> GatewayOutput {
        if payload.starts_with(b"RULESET|") {
            let parsed = std::str::from_utf8(payload)
                .map_err(|_| GatewayError::MalformedRuleset("not utf-8".into()))
                .and_then(TranslationRuleSet::decode);
            return match parsed.and_then(|r| self.install_ruleset(r)) {
                Ok(version) => GatewayOutput::RulesetApplied { version },
                Err(e) => GatewayOutput::RulesetRejected(e),
            };
        }
        match self.process_frame(payload, now_us, ctx) {
            Ok(m) => GatewayOutput::Forward(m),
            Err(e) => GatewayOutput::Dropped(e),
        }
    }
}

/// Sends a rule set from a cloud node to a gateway node; the gateway applies
/// it when the delivery event fires.
pub fn push_ruleset(
    sim: &mut Simulator,
    cloud: NodeId,
    gateway: NodeId,
    rules: &TranslationRuleSet,
) -> Result<SendOutcome, NetError> {
    let topo = sim.topology();
    if topo.node(cloud).tier != EdgeTier::Cloud || topo.node(gateway).tier != EdgeTier::Gateway {
        return Err(NetError::InvalidLink(format!(
            "rule sets travel from a CLOUD node to a GATEWAY node, not {} -> {}",
            topo.node(cloud).tier,
            topo.node(gateway).tier
        )));
    }
    sim.send(cloud, gateway, rules.encode().into_bytes())
}

#[cfg(test)]
mod tests;
