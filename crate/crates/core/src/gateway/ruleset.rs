//! Cloud-configured register translation rules and their text form.
//!
//! ```text
//! RULESET|version|count
//! RULE|unit_id|register|sensor_id|scale|offset|unit
//! ```

use std::collections::BTreeMap;

use super::GatewayError;
use crate::model::{FieldbusFrame, Measurement, Origin};

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationRule {
    pub sensor_id: String,
    pub scale: f64,
    pub offset: f64,
    pub unit: String,
}

impl TranslationRule {
    pub fn new(sensor_id: impl Into<String>, scale: f64, offset: f64, unit: impl Into<String>) -> Self {
        TranslationRule {
            sensor_id: sensor_id.into(),
            scale,
            offset,
            unit: unit.into(),
        }
    }

    pub fn apply(&self, raw_value: i32) -> f64 {
        f64::from(raw_value) * self.scale + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TranslationRuleSet {
    pub version: u64,
    rules: BTreeMap<(u8, u16), TranslationRule>,
}

impl TranslationRuleSet {
    pub fn new(version: u64) -> Self {
        TranslationRuleSet {
            version,
            rules: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, unit_id: u8, register: u16, rule: TranslationRule) -> Result<(), GatewayError> {
        if self.rules.contains_key(&(unit_id, register)) {
            return Err(GatewayError::DuplicateRule { unit_id, register });
        }
        self.rules.insert((unit_id, register), rule);
        Ok(())
    }

    pub fn with_rule(mut self, unit_id: u8, register: u16, rule: TranslationRule) -> Result<Self, GatewayError> {
        self.insert(unit_id, register, rule)?;
        Ok(self)
    }

    pub fn get(&self, unit_id: u8, register: u16) -> Option<&TranslationRule> {
        self.rules.get(&(unit_id, register))
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u8, u16, &TranslationRule)> {
        self.rules.iter().map(|(&(u, r), rule)| (u, r, rule))
    }

    pub fn encode(&self) -> String {
        let mut out = format!("RULESET|{}|{}\n", self.version, self.rules.len());
        for ((unit_id, register), r) in &self.rules {
            out.push_str(&format!(
                "RULE|{unit_id}|{register}|{}|{}|{}|{}\n",
                r.sensor_id, r.scale, r.offset, r.unit
            ));
        }
        out
    }

    pub fn decode(text: &str) -> Result<Self, GatewayError> {
        let bad = |why: &str| GatewayError::MalformedRuleset(why.to_string());
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split('|').collect();
        let [tag, version, count] = header[..] else {
            return Err(bad("header field count"));
        };
        if tag != "RULESET" {
            return Err(bad("missing RULESET header"));
        }
        let version: u64 = version.parse().map_err(|_| bad("version"))?;
        let count: usize = count.parse().map_err(|_| bad("count"))?;
        let mut set = TranslationRuleSet::new(version);
        for line in lines {
            let f: Vec<&str> = line.split('|').collect();
            let ["RULE", unit_id, register, sensor_id, scale, offset, unit] = f[..] else {
                return Err(bad(line));
            };
            let rule = TranslationRule::new(
                sensor_id,
                scale.parse().map_err(|_| bad("scale"))?,
                offset.parse().map_err(|_| bad("offset"))?,
                unit,
            );
            set.insert(
                unit_id.parse().map_err(|_| bad("unit_id"))?,
                register.parse().map_err(|_| bad("register"))?,
                rule,
            )?;
        }
        if set.len() != count {
            return Err(bad("rule count does not match header"));
        }
        Ok(set)
    }
}

/// Identity of the device a frame belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceContext {
    pub tenant_id: String,
    pub device_id: String,
}

impl DeviceContext {
    pub fn new(tenant_id: impl Into<String>, device_id: impl Into<String>) -> Self {
        DeviceContext {
            tenant_id: tenant_id.into(),
            device_id: device_id.into(),
        }
    }
}

pub fn translate(
    frame: &FieldbusFrame,
    rules: &TranslationRuleSet,
    now_us: u64,
    ctx: &DeviceContext,
    origin: Origin,
) -> Result<Measurement, GatewayError> {
    let rule = rules
        .get(frame.unit_id, frame.register)
        .ok_or(GatewayError::UnmappedRegister {
            unit_id: frame.unit_id,
            register: frame.register,
        })?;
    Ok(Measurement::new(
        ctx.tenant_id.clone(),
        ctx.device_id.clone(),
        rule.sensor_id.clone(),
        now_us,
        rule.apply(frame.raw_value),
        rule.unit.clone(),
        origin,
    )?)
}
