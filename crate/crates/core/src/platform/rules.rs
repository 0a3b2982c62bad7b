//! Smart rules: small threshold / window predicates over one sensor stream.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{Command, CommandVerb, Measurement};
use crate::stats;

/// Strict comparison; an exact tie never satisfies it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Above,
    Below,
}

impl Comparison {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparison::Above => value > bound,
            Comparison::Below => value < bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    /// Latest value against the bound.
    Threshold { cmp: Comparison, bound: f64 },
    /// Mean of the last `len` values; needs a full window.
    WindowAverage { len: usize, cmp: Comparison, bound: f64 },
    /// Least-squares slope (units per second) over the last `len` values;
    /// needs a full window.
    WindowTrend { len: usize, cmp: Comparison, bound_per_s: f64 },
}

impl Condition {
    pub fn window_len(&self) -> usize {
        match self {
            Condition::Threshold { .. } => 1,
            Condition::WindowAverage { len, .. } | Condition::WindowTrend { len, .. } => *len,
        }
    }

    /// Evaluates against a time-ordered window whose last element is the
    /// newest reading. Only the trailing `window_len()` points are used.
    pub fn holds(&self, window: &[(u64, f64)]) -> bool {
        let len = self.window_len();
        if len == 0 || window.len() < len {
            return false;
        }
        let tail = &window[window.len() - len..];
        match *self {
            Condition::Threshold { cmp, bound } => cmp.holds(tail[len - 1].1, bound),
            Condition::WindowAverage { cmp, bound, .. } => {
                let values: Vec<f64> = tail.iter().map(|(_, v)| *v).collect();
                stats::mean(&values).is_some_and(|m| cmp.holds(m, bound))
            }
            Condition::WindowTrend { cmp, bound_per_s, .. } => {
                stats::least_squares_slope_per_s(tail).is_some_and(|s| cmp.holds(s, bound_per_s))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RulePredicate {
    pub sensor_id: String,
    /// Restricts the rule to one device; `None` matches the sensor on any
    /// visible device.
    pub device_id: Option<String>,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleAction {
    EmitEvent { name: String },
    EmitCommand { verb: CommandVerb, params: BTreeMap<String, String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmartRule {
    pub rule_id: String,
    pub tenant_id: String,
    pub predicate: RulePredicate,
    pub action: RuleAction,
    pub enabled: bool,
}

impl SmartRule {
    pub fn matches_stream(&self, device_id: &str, sensor_id: &str) -> bool {
        self.predicate.sensor_id == sensor_id
            && self
                .predicate
                .device_id
                .as_deref()
                .is_none_or(|d| d == device_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FiredAction {
    Event {
        rule_id: String,
        name: String,
        device_id: String,
        sensor_id: String,
        at_us: u64,
        value: f64,
    },
    Command { rule_id: String, command: Command },
}

impl FiredAction {
    pub fn rule_id(&self) -> &str {
        match self {
            FiredAction::Event { rule_id, .. } | FiredAction::Command { rule_id, .. } => rule_id,
        }
    }

    pub(crate) fn from_rule(rule: &SmartRule, m: &Measurement) -> FiredAction {
        match &rule.action {
            RuleAction::EmitEvent { name } => FiredAction::Event {
                rule_id: rule.rule_id.clone(),
                name: name.clone(),
                device_id: m.device_id.clone(),
                sensor_id: m.sensor_id.clone(),
                at_us: m.timestamp_us,
                value: m.value,
            },
            RuleAction::EmitCommand { verb, params } => {
                let mut command = Command::new(m.device_id.clone(), *verb, m.timestamp_us, None)
                    .expect("no deadline");
                command.payload = params.clone();
                FiredAction::Command {
                    rule_id: rule.rule_id.clone(),
                    command,
                }
            }
        }
    }
}
