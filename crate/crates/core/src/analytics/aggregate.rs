//! Periodic per-sensor summaries sent from the edge to the platform.
//!
//! One record per stream and period:
//!
//! ```text
//! AGG|tenant|device|sensor|from_us|to_us|count|min|max|mean|unit
//! ```

use std::collections::BTreeMap;

use crate::lambda::ExactSum;
use crate::model::{encode_measurement, format_value, Measurement, ModelError, Origin};

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub tenant_id: String,
    pub device_id: String,
    pub sensor_id: String,
    pub from_us: u64,
    pub to_us: u64,
    pub count: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub unit: String,
}

impl AggregateRecord {
    pub fn encode(&self) -> String {
        format!(
            "AGG|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}\n",
            self.tenant_id,
            self.device_id,
            self.sensor_id,
            self.from_us,
            self.to_us,
            self.count,
            format_value(self.min),
            format_value(self.max),
            format_value(self.mean),
            self.unit
        )
    }

    /// Expands the summary into synthetic `<sensor>.count|min|max|mean`
    /// measurements stamped at the end of the period.
    pub fn to_measurements(&self) -> Result<Vec<Measurement>, ModelError> {
        [
            ("count", self.count as f64, "1"),
            ("min", self.min, self.unit.as_str()),
            ("max", self.max, self.unit.as_str()),
            ("mean", self.mean, self.unit.as_str()),
        ]
        .into_iter()
        .map(|(suffix, value, unit)| {
            Measurement::new(
                self.tenant_id.clone(),
                self.device_id.clone(),
                format!("{}.{suffix}", self.sensor_id),
                self.to_us,
                value,
                unit,
                Origin::Native,
            )
        })
        .collect()
    }
}

#[derive(Debug, Clone, Default)]
struct Acc {
    tenant_id: String,
    unit: String,
    count: u64,
    min: f64,
    max: f64,
    sum: ExactSum,
}

/// Accumulates readings at the edge into tumbling event-time periods
/// `(start, start + period]` and emits one record per stream per period,
/// tracking the bytes raw forwarding would have cost.
#[derive(Debug, Clone, Default)]
pub struct Aggregator {
    period_us: u64,
    period_start_us: u64,
    streams: BTreeMap<(String, String), Acc>,
    pub raw_bytes: u64,
    pub aggregate_bytes: u64,
}

impl Aggregator {
    pub fn new(period_us: u64) -> Self {
        assert!(period_us > 0, "aggregate period must be positive");
        Aggregator {
            period_us,
            ..Self::default()
        }
    }

    fn period_end(&self) -> u64 {
        self.period_start_us + self.period_us
    }

    /// Adds readings; returns the records of any period they close.
    pub fn observe(&mut self, readings: &[Measurement]) -> Vec<AggregateRecord> {
        let mut closed = Vec::new();
        for m in readings {
            while m.timestamp_us > self.period_end() {
                closed.extend(self.close_period());
            }
            self.raw_bytes += encode_measurement(m).map_or(0, |l| l.len() as u64);
            let acc = self
                .streams
                .entry((m.device_id.clone(), m.sensor_id.clone()))
                .or_insert_with(|| Acc {
                    tenant_id: m.tenant_id.clone(),
                    unit: m.unit.clone(),
                    min: f64::INFINITY,
                    max: f64::NEG_INFINITY,
                    ..Acc::default()
                });
            acc.count += 1;
            acc.min = acc.min.min(m.value);
            acc.max = acc.max.max(m.value);
            acc.sum.add(m.value);
        }
        closed
    }

    /// Closes every period that has ended by `now_us`. Partial periods stay
    /// open.
    pub fn finish(&mut self, now_us: u64) -> Vec<AggregateRecord> {
        let mut closed = Vec::new();
        while now_us >= self.period_end() {
            closed.extend(self.close_period());
            if self.streams.is_empty() {
                break;
            }
        }
        closed
    }

    /// An empty period yields no records.
    fn close_period(&mut self) -> Vec<AggregateRecord> {
        let from_us = self.period_start_us;
        let to_us = self.period_end();
        self.period_start_us = to_us;
        let records: Vec<AggregateRecord> = std::mem::take(&mut self.streams)
            .into_iter()
            .map(|((device_id, sensor_id), a)| AggregateRecord {
                tenant_id: a.tenant_id,
                device_id,
                sensor_id,
                from_us,
                to_us,
                count: a.count,
                min: a.min,
                max: a.max,
                mean: a.sum.value() / a.count as f64,
                unit: a.unit,
            })
            .collect();
        self.aggregate_bytes += records.iter().map(|r| r.encode().len() as u64).sum::<u64>();
        records
    }
}
