//! In-memory hot store and append-only data-lake sinks.

use std::collections::{BTreeMap, VecDeque};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;

use super::PlatformError;
use crate::model::{encode_measurement, Measurement};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StreamKey {
    pub tenant_id: String,
    pub device_id: String,
    pub sensor_id: String,
}

impl StreamKey {
    pub fn of(m: &Measurement) -> Self {
        StreamKey {
            tenant_id: m.tenant_id.clone(),
            device_id: m.device_id.clone(),
            sensor_id: m.sensor_id.clone(),
        }
    }
}

/// Per-stream logs ordered by timestamp.
#[derive(Debug, Clone, Default)]
pub struct HotStore {
    streams: BTreeMap<StreamKey, VecDeque<Measurement>>,
    len: usize,
}

impl HotStore {
    pub fn insert(&mut self, m: Measurement) {
        let log = self.streams.entry(StreamKey::of(&m)).or_default();
        // Stable for equal timestamps: later arrivals go after earlier ones.
        let at = log.partition_point(|x| x.timestamp_us <= m.timestamp_us);
        log.insert(at, m);
        self.len += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn streams(&self) -> impl Iterator<Item = (&StreamKey, &VecDeque<Measurement>)> {
        self.streams.iter()
    }

    pub fn count_for_tenant(&self, tenant_id: &str) -> usize {
        self.streams
            .iter()
            .filter(|(k, _)| k.tenant_id == tenant_id)
            .map(|(_, v)| v.len())
            .sum()
    }

    /// Measurements strictly older than `cutoff_us`, grouped by tenant, in
    /// stream order. Nothing is removed.
    pub fn older_than(&self, cutoff_us: u64) -> BTreeMap<String, Vec<Measurement>> {
        let mut out: BTreeMap<String, Vec<Measurement>> = BTreeMap::new();
        for (key, log) in &self.streams {
            let n = log.partition_point(|m| m.timestamp_us < cutoff_us);
            if n > 0 {
                out.entry(key.tenant_id.clone())
                    .or_default()
                    .extend(log.iter().take(n).cloned());
            }
        }
        out
    }

    /// Drops this tenant's measurements strictly older than `cutoff_us`.
    pub fn evict_tenant(&mut self, tenant_id: &str, cutoff_us: u64) -> usize {
        let mut removed = 0;
        for (key, log) in self.streams.iter_mut() {
            if key.tenant_id != tenant_id {
                continue;
            }
            let n = log.partition_point(|m| m.timestamp_us < cutoff_us);
            log.drain(..n);
            removed += n;
        }
        self.streams.retain(|_, log| !log.is_empty());
        self.len -= removed;
        removed
    }
}

/// Long-term storage target for measurements leaving the hot window.
pub trait LakeSink: Send {
    fn name(&self) -> &str;
    fn append(&mut self, tenant_id: &str, batch: &[Measurement]) -> Result<(), PlatformError>;
}

/// One `<tenant_id>.lake` file per tenant under a directory, each line a
/// canonical measurement.
#[derive(Debug)]
pub struct DirSink {
    name: String,
    dir: PathBuf,
}

impl DirSink {
    pub fn new(name: impl Into<String>, dir: impl Into<PathBuf>) -> Self {
        DirSink {
            name: name.into(),
            dir: dir.into(),
        }
    }

    pub fn path_for(&self, tenant_id: &str) -> PathBuf {
        self.dir.join(format!("{tenant_id}.lake"))
    }
}

impl LakeSink for DirSink {
    fn name(&self) -> &str {
        &self.name
    }

    fn append(&mut self, tenant_id: &str, batch: &[Measurement]) -> Result<(), PlatformError> {
        let unavailable = |e: std::io::Error| PlatformError::SinkUnavailable(format!("{}: {e}", self.name));
        let mut buf = String::new();
        for m in batch {
            buf.push_str(&encode_measurement(m).expect("hot store holds valid measurements"));
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.path_for(tenant_id))
            .map_err(unavailable)?;
        file.write_all(buf.as_bytes()).map_err(unavailable)
    }
}

/// Keeps the same per-tenant line files in memory.
#[derive(Debug, Default, Clone)]
pub struct MemorySink {
    name: String,
    files: BTreeMap<String, String>,
}

impl MemorySink {
    pub fn new(name: impl Into<String>) -> Self {
        MemorySink {
            name: name.into(),
            files: BTreeMap::new(),
        }
    }

    /// Contents of `<tenant_id>.lake`.
    pub fn file(&self, tenant_id: &str) -> Option<&str> {
        self.files.get(tenant_id).map(String::as_str)
    }

    pub fn line_count(&self) -> usize {
        self.files.values().map(|f| f.lines().count()).sum()
    }
}

impl LakeSink for MemorySink {
    fn name(&self) -> &str {
        &self.name
    }

    fn append(&mut self, tenant_id: &str, batch: &[Measurement]) -> Result<(), PlatformError> {
        let file = self.files.entry(tenant_id.to_string()).or_default();
        for m in batch {
            file.push_str(&encode_measurement(m).expect("hot store holds valid measurements"));
        }
        Ok(())
    }
}

/// Shares a [`MemorySink`] between the platform and an observer.
#[derive(Debug, Clone, Default)]
pub struct SharedMemorySink(pub std::sync::Arc<parking_lot::Mutex<MemorySink>>);

impl SharedMemorySink {
    pub fn new(name: impl Into<String>) -> Self {
        SharedMemorySink(std::sync::Arc::new(parking_lot::Mutex::new(MemorySink::new(name))))
    }
}

impl LakeSink for SharedMemorySink {
    fn name(&self) -> &str {
        "shared-memory"
    }

    fn append(&mut self, tenant_id: &str, batch: &[Measurement]) -> Result<(), PlatformError> {
        self.0.lock().append(tenant_id, batch)
    }
}
