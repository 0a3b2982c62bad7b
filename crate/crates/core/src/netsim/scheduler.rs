use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{NetError, NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    /// Payload carried over a link.
    Delivery,
    /// Local wake-up scheduled by a node for itself.
    Timer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub fire_at_us: u64,
    pub seq: u64,
    pub source: NodeId,
    pub target: NodeId,
    pub kind: EventKind,
    pub payload: Vec<u8>,
}

/// Heap entry ordered by `(fire_at_us, seq)` only.
#[derive(Debug)]
struct Queued(Event);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}
impl Queued {
    fn key(&self) -> (u64, u64) {
        (self.0.fire_at_us, self.0.seq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SendOutcome {
    Scheduled { deliver_at_us: u64, seq: u64 },
    Dropped,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NetStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub timers_fired: u64,
}

impl NetStats {
    pub fn in_flight(&self) -> u64 {
        self.sent - self.delivered - self.dropped
    }
}

/// Callback invoked for every event the scheduler pops.
pub trait Handler {
    fn on_event(&mut self, sim: &mut Simulator, event: Event);
}

impl<F: FnMut(&mut Simulator, Event)> Handler for F {
    fn on_event(&mut self, sim: &mut Simulator, event: Event) {
        self(sim, event)
    }
}

/// Single-timeline discrete-event scheduler over a [`Topology`].
#[derive(Debug)]
pub struct Simulator {
    topology: Topology,
    seed: u64,
    now_us: u64,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Queued>>,
    link_rngs: BTreeMap<(NodeId, NodeId), ChaCha8Rng>,
    stats: NetStats,
    trace: Sha256,
    trace_log: Option<Vec<(u64, u64, NodeId, EventKind)>>,
}

impl Simulator {
    pub fn new(topology: Topology, seed: u64) -> Self {
        Simulator {
            topology,
            seed,
            now_us: 0,
            next_seq: 0,
            queue: BinaryHeap::new(),
            link_rngs: BTreeMap::new(),
            stats: NetStats::default(),
            trace: Sha256::new(),
            trace_log: None,
        }
    }

    /// Keeps `(fire_at, seq, target, kind)` for every processed event.
    pub fn with_trace_log(mut self) -> Self {
        self.trace_log = Some(Vec::new());
        self
    }

    pub fn now(&self) -> u64 {
        self.now_us
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn stats(&self) -> NetStats {
        self.stats
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn trace_log(&self) -> &[(u64, u64, NodeId, EventKind)] {
        self.trace_log.as_deref().unwrap_or(&[])
    }

    /// Hex SHA-256 over every processed event, in processing order.
    pub fn trace_digest(&self) -> String {
        hex::encode(self.trace.clone().finalize())
    }

    fn link_rng(&mut self, from: NodeId, to: NodeId) -> &mut ChaCha8Rng {
        let seed = self.seed;
        let topology = &self.topology;
        self.link_rngs.entry((from, to)).or_insert_with(|| {
            // Keyed by link endpoints so adding links leaves other streams untouched.
            let mut h = Sha256::new();
            h.update(seed.to_le_bytes());
            h.update(topology.node(from).name.as_bytes());
            h.update([0u8]);
            h.update(topology.node(to).name.as_bytes());
            let digest: [u8; 32] = h.finalize().into();
            ChaCha8Rng::from_seed(digest)
        })
    }

    fn push(&mut self, fire_at_us: u64, source: NodeId, target: NodeId, kind: EventKind, payload: Vec<u8>) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Queued(Event {
            fire_at_us,
            seq,
            source,
            target,
            kind,
            payload,
        })));
        seq
    }

    /// Sends `payload` over the `from → to` link at the current virtual time.
    ///
    /// Delivery happens at `now + latency + ⌈size / bandwidth⌉ + jitter`, with
    /// jitter drawn uniformly from `[0, 2·jitter_us]`. The link's loss draw
    /// comes first, so a dropped message consumes exactly one random number.
    pub fn send(&mut self, from: NodeId, to: NodeId, payload: Vec<u8>) -> Result<SendOutcome, NetError> {
        let link = self
            .topology
            .link(from, to)
            .ok_or_else(|| self.topology.no_route(from, to))?
            .clone();
        self.stats.sent += 1;
        let rng = self.link_rng(from, to);
        if link.loss_probability > 0.0 && rng.gen::<f64>() < link.loss_probability {
            self.stats.dropped += 1;
            return Ok(SendOutcome::Dropped);
        }
        let jitter = if link.jitter_us > 0 {
            rng.gen_range(0..=2 * link.jitter_us)
        } else {
            0
        };
        let deliver_at_us = self.now_us + link.base_transit_us(payload.len()) + jitter;
        let seq = self.push(deliver_at_us, from, to, EventKind::Delivery, payload);
        Ok(SendOutcome::Scheduled { deliver_at_us, seq })
    }

    /// Same as [`Simulator::send`] with nodes addressed by name.
    pub fn send_named(&mut self, from: &str, to: &str, payload: Vec<u8>) -> Result<SendOutcome, NetError> {
        let from = self.topology.require(from)?;
        let to = self.topology.require(to)?;
        self.send(from, to, payload)
    }

    /// Schedules a local timer for `node`. Times in the past fire at `now`.
    pub fn schedule_timer(&mut self, node: NodeId, at_us: u64, payload: Vec<u8>) -> u64 {
        let at = at_us.max(self.now_us);
        self.push(at, node, node, EventKind::Timer, payload)
    }

    /// Processes every event with `fire_at_us <= t_end_us` in `(fire_at, seq)`
    /// order, then sets the clock to `t_end_us`. Returns the number of events
    /// processed.
    pub fn run_until<H: Handler + ?Sized>(&mut self, t_end_us: u64, handler: &mut H) -> usize {
        let mut processed = 0;
        while let Some(Reverse(top)) = self.queue.peek() {
            if top.0.fire_at_us > t_end_us {
                break;
            }
            let Reverse(Queued(event)) = self.queue.pop().expect("peeked");
            debug_assert!(event.fire_at_us >= self.now_us);
            self.now_us = event.fire_at_us;
            match event.kind {
                EventKind::Delivery => self.stats.delivered += 1,
                EventKind::Timer => self.stats.timers_fired += 1,
            }
            self.trace.update(event.fire_at_us.to_le_bytes());
            self.trace.update(event.seq.to_le_bytes());
            self.trace.update(event.source.0.to_le_bytes());
            self.trace.update(event.target.0.to_le_bytes());
            self.trace.update([event.kind as u8]);
            self.trace.update((event.payload.len() as u64).to_le_bytes());
            self.trace.update(&event.payload);
            if let Some(log) = self.trace_log.as_mut() {
                log.push((event.fire_at_us, event.seq, event.target, event.kind));
            }
            processed += 1;
            handler.on_event(self, event);
        }
        self.now_us = self.now_us.max(t_end_us);
        processed
    }

    /// Runs until the queue is empty.
    pub fn run_to_completion<H: Handler + ?Sized>(&mut self, handler: &mut H) -> usize {
        let mut total = 0;
        while let Some(Reverse(top)) = self.queue.peek() {
            let t = top.0.fire_at_us;
            total += self.run_until(t, handler);
        }
        total
    }
}
