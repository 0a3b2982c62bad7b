//! Lambda architecture: one fork feeding an immutable master dataset (batch
//! layer) and incremental speed views, merged by a serving layer.
//!
//! Coverage of the two layers is split at `checkpoint_seq`: batch views fold
//! every master entry up to and including the checkpoint, speed views hold
//! only later sequence numbers. All view aggregates are monoids, so serving a
//! query is a plain merge of both sides.

mod exact;
mod harness;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{encode_measurement, Measurement, Origin};

pub use exact::ExactSum;
pub use harness::{throughput_harness, HarnessConfig, ServiceTime, ThroughputReport};

pub const DEFAULT_BUCKET_US: u64 = 60_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LambdaError {
    #[error("unsupported view kind {0:?}")]
    UnsupportedKind(String),
    #[error("unknown fork placement {0:?}")]
    UnknownPlacement(String),
    #[error("snapshot sequence {requested} is behind checkpoint {checkpoint}")]
    StaleSnapshot { requested: u64, checkpoint: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ForkPlacement {
    AfterPlatform,
    BeforePlatformEdge,
}

impl fmt::Display for ForkPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ForkPlacement::AfterPlatform => "AFTER_PLATFORM",
            ForkPlacement::BeforePlatformEdge => "BEFORE_PLATFORM_EDGE",
        })
    }
}

impl FromStr for ForkPlacement {
    type Err = LambdaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "AFTER_PLATFORM" => Ok(ForkPlacement::AfterPlatform),
            "BEFORE_PLATFORM_EDGE" => Ok(ForkPlacement::BeforePlatformEdge),
            other => Err(LambdaError::UnknownPlacement(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViewKind {
    Count,
    Sum,
    Mean,
    Max,
}

impl ViewKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewKind::Count => "COUNT",
            ViewKind::Sum => "SUM",
            ViewKind::Mean => "MEAN",
            ViewKind::Max => "MAX",
        }
    }
}

impl fmt::Display for ViewKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ViewKind {
    type Err = LambdaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "COUNT" => Ok(ViewKind::Count),
            "SUM" => Ok(ViewKind::Sum),
            "MEAN" => Ok(ViewKind::Mean),
            "MAX" => Ok(ViewKind::Max),
            other => Err(LambdaError::UnsupportedKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewOrigin {
    Speed,
    Batch,
}

/// Monoid state behind every view kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregate {
    pub count: u64,
    pub sum: ExactSum,
    pub max: Option<f64>,
}

impl Aggregate {
    pub fn add(&mut self, value: f64) {
        self.count += 1;
        self.sum.add(value);
        self.max = Some(self.max.map_or(value, |m| m.max(value)));
    }

    pub fn merge(&mut self, other: &Aggregate) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.max = match (self.max, other.max) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
    }

    /// COUNT and SUM of an empty aggregate are 0; MEAN and MAX are undefined.
    pub fn get(&self, kind: ViewKind) -> Option<f64> {
        match kind {
            ViewKind::Count => Some(self.count as f64),
            ViewKind::Sum => Some(self.sum.value()),
            ViewKind::Mean => (self.count > 0).then(|| self.sum.value() / self.count as f64),
            ViewKind::Max => self.max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StreamId {
    pub tenant_id: String,
    pub device_id: String,
    pub sensor_id: String,
}

/// Internal view key: interned stream index plus time bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViewKey {
    pub stream: u32,
    pub bucket: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct MasterEntry {
    seq: u64,
    stream: u32,
    timestamp_us: u64,
    value: f64,
}

#[derive(Debug, Clone)]
struct StreamMeta {
    id: StreamId,
    unit: String,
    origin: Origin,
}

/// Append-only master dataset with compactly stored entries.
#[derive(Debug, Clone, Default)]
pub struct MasterDataset {
    streams: Vec<StreamMeta>,
    index: HashMap<(StreamId, String, Origin), u32>,
    entries: Vec<MasterEntry>,
    checkpoint_seq: u64,
}

impl MasterDataset {
    fn intern(&mut self, m: &Measurement) -> u32 {
        let id = StreamId {
            tenant_id: m.tenant_id.clone(),
            device_id: m.device_id.clone(),
            sensor_id: m.sensor_id.clone(),
        };
        let key = (id, m.unit.clone(), m.origin);
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.streams.len() as u32;
        self.streams.push(StreamMeta {
            id: key.0.clone(),
            unit: key.1.clone(),
            origin: key.2,
        });
        self.index.insert(key, i);
        i
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_seq(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.seq)
    }

    pub fn checkpoint_seq(&self) -> u64 {
        self.checkpoint_seq
    }

    fn measurement(&self, e: &MasterEntry) -> Measurement {
        let meta = &self.streams[e.stream as usize];
        Measurement {
            tenant_id: meta.id.tenant_id.clone(),
            device_id: meta.id.device_id.clone(),
            sensor_id: meta.id.sensor_id.clone(),
            timestamp_us: e.timestamp_us,
            value: e.value,
            unit: meta.unit.clone(),
            origin: meta.origin,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, Measurement)> + '_ {
        self.entries.iter().map(|e| (e.seq, self.measurement(e)))
    }

    /// Canonical line-format image of the dataset.
    pub fn to_lines(&self) -> String {
        self.iter()
            .map(|(_, m)| encode_measurement(&m).expect("validated upstream"))
            .collect()
    }
}

#[derive(Debug, Default)]
struct SpeedState {
    /// (seq, key, value) applied since the checkpoint.
    log: Vec<(u64, ViewKey, f64)>,
    views: BTreeMap<ViewKey, Aggregate>,
}

/// Incremental views over data newer than the checkpoint. One writer, any
/// number of concurrent readers.
#[derive(Debug, Default)]
pub struct SpeedLayer {
    state: RwLock<SpeedState>,
}

impl SpeedLayer {
    fn apply(&self, seq: u64, key: ViewKey, value: f64) {
        let mut s = self.state.write();
        s.log.push((seq, key, value));
        s.views.entry(key).or_default().add(value);
    }

    /// Drops every contribution with `seq <= checkpoint` and rebuilds views
    /// from what remains.
    fn prune(&self, checkpoint: u64) {
        let mut s = self.state.write();
        s.log.retain(|(seq, _, _)| *seq > checkpoint);
        let mut views: BTreeMap<ViewKey, Aggregate> = BTreeMap::new();
        for (_, key, value) in &s.log {
            views.entry(*key).or_default().add(*value);
        }
        s.views = views;
    }

    pub fn snapshot(&self) -> BTreeMap<ViewKey, Aggregate> {
        self.state.read().views.clone()
    }

    pub fn min_seq(&self) -> Option<u64> {
        self.state.read().log.first().map(|e| e.0)
    }

    pub fn len(&self) -> usize {
        self.state.read().log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchViews {
    pub checkpoint_seq: u64,
    pub views: BTreeMap<ViewKey, Aggregate>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForkCounters {
    pub ingested: u64,
    pub mastered: u64,
    pub speed_applied: u64,
    pub duplicates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForkOutcome {
    Applied,
    /// Sequence number not after the last one seen; nothing changed.
    Duplicate,
}

/// Query over the serving layer: the kind plus a stream/bucket selection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeQuery {
    pub kind: ViewKind,
    pub tenant_id: String,
    pub device_id: Option<String>,
    pub sensor_id: Option<String>,
    /// Inclusive-exclusive bucket range.
    pub buckets: Option<(u64, u64)>,
}

impl ServeQuery {
    pub fn new(kind: ViewKind, tenant_id: impl Into<String>) -> Self {
        ServeQuery {
            kind,
            tenant_id: tenant_id.into(),
            device_id: None,
            sensor_id: None,
            buckets: None,
        }
    }

    pub fn stream(mut self, device_id: impl Into<String>, sensor_id: impl Into<String>) -> Self {
        self.device_id = Some(device_id.into());
        self.sensor_id = Some(sensor_id.into());
        self
    }

    pub fn buckets(mut self, from: u64, to: u64) -> Self {
        self.buckets = Some((from, to));
        self
    }

    fn selects(&self, id: &StreamId, bucket: u64) -> bool {
        id.tenant_id == self.tenant_id
            && self.device_id.as_ref().is_none_or(|d| *d == id.device_id)
            && self.sensor_id.as_ref().is_none_or(|s| *s == id.sensor_id)
            && self.buckets.is_none_or(|(lo, hi)| bucket >= lo && bucket < hi)
    }
}

#[derive(Debug)]
pub struct LambdaPipeline {
    bucket_us: u64,
    master: MasterDataset,
    speed: SpeedLayer,
    batch: BatchViews,
    counters: ForkCounters,
}

impl Default for LambdaPipeline {
    fn default() -> Self {
        Self::new(DEFAULT_BUCKET_US)
    }
}

impl LambdaPipeline {
    pub fn new(bucket_us: u64) -> Self {
        assert!(bucket_us > 0, "bucket width must be positive");
        LambdaPipeline {
            bucket_us,
            master: MasterDataset::default(),
            speed: SpeedLayer::default(),
            batch: BatchViews::default(),
            counters: ForkCounters::default(),
        }
    }

    pub fn bucket_us(&self) -> u64 {
        self.bucket_us
    }

    pub fn master(&self) -> &MasterDataset {
        &self.master
    }

    pub fn speed(&self) -> &SpeedLayer {
        &self.speed
    }

    pub fn batch(&self) -> &BatchViews {
        &self.batch
    }

    pub fn counters(&self) -> ForkCounters {
        self.counters
    }

    pub fn checkpoint_seq(&self) -> u64 {
        self.master.checkpoint_seq
    }

    /// Routes one measurement to both the master dataset and the speed
    /// layer. Sequence numbers must strictly increase; a repeat (or older)
    /// number is rejected without side effects.
    pub fn fork_ingest(&mut self, seq: u64, m: Measurement) -> ForkOutcome {
        self.counters.ingested += 1;
        if seq <= self.master.last_seq() {
            self.counters.duplicates += 1;
            return ForkOutcome::Duplicate;
        }
        let stream = self.master.intern(&m);
        let key = ViewKey {
            stream,
            bucket: m.timestamp_us / self.bucket_us,
        };
        self.master.entries.push(MasterEntry {
            seq,
            stream,
            timestamp_us: m.timestamp_us,
            value: m.value,
        });
        self.counters.mastered += 1;
        self.speed.apply(seq, key, m.value);
        self.counters.speed_applied += 1;
        ForkOutcome::Applied
    }

    /// Recomputes batch views from the whole master dataset.
    pub fn batch_recompute(&mut self) -> u64 {
        let latest = self.master.last_seq();
        self.batch_recompute_upto(latest)
            .expect("latest is never behind the checkpoint")
    }

    /// Recomputes batch views from the master prefix with `seq <= snapshot`,
    /// moves the checkpoint there and prunes the covered speed entries.
    pub fn batch_recompute_upto(&mut self, snapshot: u64) -> Result<u64, LambdaError> {
        if snapshot < self.master.checkpoint_seq {
            return Err(LambdaError::StaleSnapshot {
                requested: snapshot,
                checkpoint: self.master.checkpoint_seq,
            });
        }
        let mut views: BTreeMap<ViewKey, Aggregate> = BTreeMap::new();
        for e in self.master.entries.iter().take_while(|e| e.seq <= snapshot) {
            views
                .entry(ViewKey {
                    stream: e.stream,
                    bucket: e.timestamp_us / self.bucket_us,
                })
                .or_default()
                .add(e.value);
        }
        self.batch = BatchViews {
            checkpoint_seq: snapshot,
            views,
        };
        self.master.checkpoint_seq = snapshot;
        self.speed.prune(snapshot);
        Ok(snapshot)
    }

    /// Merges batch and speed aggregates of every view the query selects.
    pub fn serve(&self, q: &ServeQuery) -> Option<f64> {
        self.serve_aggregate(q).get(q.kind)
    }

    pub fn serve_named(&self, kind: &str, q: ServeQuery) -> Result<Option<f64>, LambdaError> {
        let kind: ViewKind = kind.parse()?;
        Ok(self.serve(&ServeQuery { kind, ..q }))
    }

    pub fn serve_aggregate(&self, q: &ServeQuery) -> Aggregate {
        let mut acc = Aggregate::default();
        let selected = |key: &ViewKey| q.selects(&self.master.streams[key.stream as usize].id, key.bucket);
        for (key, agg) in &self.batch.views {
            if selected(key) {
                acc.merge(agg);
            }
        }
        for (key, agg) in &self.speed.snapshot() {
            if selected(key) {
                acc.merge(agg);
            }
        }
        acc
    }

    /// Stream identities in interning order.
    pub fn streams(&self) -> impl Iterator<Item = &StreamId> {
        self.master.streams.iter().map(|s| &s.id)
    }
}
