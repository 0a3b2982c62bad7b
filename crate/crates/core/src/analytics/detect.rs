//! Window detectors used by the streaming engine.

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::model::CommandVerb;
use crate::platform::{Comparison, Condition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Detector {
    Threshold,
    MeanThreshold,
    Slope,
}

/// A business rule over the last `window_len` readings of one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRule {
    pub rule_id: String,
    pub sensor_id: String,
    pub window_len: usize,
    pub detector: Detector,
    pub cmp: Comparison,
    /// Value bound, or slope bound in units per second for [`Detector::Slope`].
    pub bound: f64,
    pub action: CommandVerb,
}

impl WindowRule {
    pub fn new(
        rule_id: impl Into<String>,
        sensor_id: impl Into<String>,
        window_len: usize,
        detector: Detector,
        cmp: Comparison,
        bound: f64,
    ) -> Result<Self, AnalyticsError> {
        let rule = WindowRule {
            rule_id: rule_id.into(),
            sensor_id: sensor_id.into(),
            window_len,
            detector,
            cmp,
            bound,
            action: CommandVerb::Stop,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        let min = if self.detector == Detector::Slope { 2 } else { 1 };
        if self.window_len < min {
            return Err(AnalyticsError::InvalidRule(format!(
                "{}: window_len {} below {min}",
                self.rule_id, self.window_len
            )));
        }
        if !self.bound.is_finite() {
            return Err(AnalyticsError::InvalidRule(format!("{}: bound not finite", self.rule_id)));
        }
        Ok(())
    }

    pub fn condition(&self) -> Condition {
        match self.detector {
            Detector::Threshold => Condition::Threshold {
                cmp: self.cmp,
                bound: self.bound,
            },
            Detector::MeanThreshold => Condition::WindowAverage {
                len: self.window_len,
                cmp: self.cmp,
                bound: self.bound,
            },
            Detector::Slope => Condition::WindowTrend {
                len: self.window_len,
                cmp: self.cmp,
                bound_per_s: self.bound,
            },
        }
    }
}

/// True iff the rule fires on this time-ordered window. Window rules need
/// a full window; a tie with the bound never fires.
pub fn process_window(rule: &WindowRule, window: &[(u64, f64)]) -> bool {
    rule.condition().holds(window)
}
