use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::{Result, RuntimeError};
use crate::epicnet::{LatentSet, LatentVector};
use crate::netem::{Frame, FrameKind};

/// Virtual or wall time in nanoseconds since the start of a run.
pub type Nanos = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleState {
    Collecting,
    Released,
    Completed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Stored; `complete` is true once every device has reported.
    Inserted { complete: bool },
    /// A latent for this `(sample, device)` is already held.
    Duplicate,
    /// The sample was already released for decoding.
    Late,
    /// The sample finished and was evicted.
    Stale,
}

/// Latents released for one decode.
#[derive(Debug, Clone, PartialEq)]
pub struct Collected {
    pub sample_id: u64,
    pub latents: LatentSet,
    pub mask: Vec<bool>,
    pub arrivals: BTreeMap<usize, Nanos>,
    /// Released by the deadline rather than by a complete set.
    pub timed_out: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BufferStats {
    pub inserted: u64,
    pub duplicates: u64,
    pub late: u64,
    pub stale: u64,
}

#[derive(Debug)]
struct Entry {
    latents: LatentSet,
    arrivals: BTreeMap<usize, Nanos>,
    state: SampleState,
}

/// Collector keyed by `(sample_id, device_id)`, tolerant of any arrival order.
#[derive(Debug)]
pub struct HashBuffer {
    n_devices: usize,
    latent_dim: usize,
    entries: HashMap<u64, Entry>,
    completed: HashSet<u64>,
    stats: BufferStats,
}

impl HashBuffer {
    pub fn new(n_devices: usize, latent_dim: usize) -> Self {
        Self {
            n_devices,
            latent_dim,
            entries: HashMap::new(),
            completed: HashSet::new(),
            stats: BufferStats::default(),
        }
    }

    fn entry(&mut self, sample_id: u64) -> &mut Entry {
        let n = self.n_devices;
        self.entries.entry(sample_id).or_insert_with(|| Entry {
            latents: LatentSet::new(n),
            arrivals: BTreeMap::new(),
            state: SampleState::Collecting,
        })
    }

    /// Store a validated latent frame received at `now`.
    pub fn insert(&mut self, frame: &Frame, now: Nanos) -> Result<InsertOutcome> {
        if frame.kind != FrameKind::Latent {
            return Err(RuntimeError::Protocol(format!("expected a latent frame, got {:?}", frame.kind)));
        }
        let device = frame.device_id as usize;
        if device >= self.n_devices {
            return Err(RuntimeError::Protocol(format!(
                "device {device} outside 0..{}",
                self.n_devices
            )));
        }
        if frame.payload.len() != 4 * self.latent_dim {
            return Err(RuntimeError::Protocol(format!(
                "latent payload of {} bytes, expected {}",
                frame.payload.len(),
                4 * self.latent_dim
            )));
        }
        if self.completed.contains(&frame.sample_id) {
            self.stats.stale += 1;
            return Ok(InsertOutcome::Stale);
        }
        let n = self.n_devices;
        let entry = self.entry(frame.sample_id);
        if entry.state != SampleState::Collecting {
            self.stats.late += 1;
            return Ok(InsertOutcome::Late);
        }
        if entry.latents.get(device).is_some() {
            self.stats.duplicates += 1;
            return Ok(InsertOutcome::Duplicate);
        }
        let latent = LatentVector::from_payload(&frame.payload, device, frame.sample_id)?;
        entry.latents.insert(latent)?;
        entry.arrivals.insert(device, now);
        let complete = entry.latents.present() == n;
        self.stats.inserted += 1;
        Ok(InsertOutcome::Inserted { complete })
    }

    pub fn state(&self, sample_id: u64) -> Option<SampleState> {
        if self.completed.contains(&sample_id) {
            return Some(SampleState::Completed);
        }
        self.entries.get(&sample_id).map(|e| e.state)
    }

    pub fn is_complete(&self, sample_id: u64) -> bool {
        self.entries
            .get(&sample_id)
            .is_some_and(|e| e.latents.present() == self.n_devices)
    }

    /// Release the sample if every device has reported or `now >= deadline`.
    ///
    /// Returns `None` while still waiting, and for samples already released.
    pub fn try_collect(&mut self, sample_id: u64, now: Nanos, deadline: Nanos) -> Option<Collected> {
        if self.completed.contains(&sample_id) {
            return None;
        }
        let complete = self.is_complete(sample_id);
        if !complete && now < deadline {
            return None;
        }
        let entry = self.entry(sample_id);
        if entry.state != SampleState::Collecting {
            return None;
        }
        entry.state = SampleState::Released;
        Some(Collected {
            sample_id,
            latents: entry.latents.clone(),
            mask: entry.latents.mask(),
            arrivals: entry.arrivals.clone(),
            timed_out: !complete,
        })
    }

    /// Mark a released sample finished and evict its latents.
    pub fn complete(&mut self, sample_id: u64) {
        self.entries.remove(&sample_id);
        self.completed.insert(sample_id);
    }

    pub fn stats(&self) -> BufferStats {
        self.stats
    }

    /// Samples currently held (collecting or released).
    pub fn pending(&self) -> usize {
        self.entries.len()
    }
}

/// [`HashBuffer`] shared between socket readers and the decode loop.
#[derive(Debug)]
pub struct SharedBuffer {
    inner: Mutex<HashBuffer>,
    changed: Condvar,
    epoch: Instant,
}

impl SharedBuffer {
    pub fn new(n_devices: usize, latent_dim: usize, epoch: Instant) -> Self {
        Self {
            inner: Mutex::new(HashBuffer::new(n_devices, latent_dim)),
            changed: Condvar::new(),
            epoch,
        }
    }

    pub fn now(&self) -> Nanos {
        self.epoch.elapsed().as_nanos() as Nanos
    }

    pub fn insert(&self, frame: &Frame) -> Result<InsertOutcome> {
        let now = self.now();
        let outcome = self.inner.lock().unwrap().insert(frame, now)?;
        if matches!(outcome, InsertOutcome::Inserted { complete: true }) {
            self.changed.notify_all();
        }
        Ok(outcome)
    }

    /// Block until the sample is complete or `deadline` (relative to the epoch) passes.
    pub fn collect_blocking(&self, sample_id: u64, deadline: Nanos) -> Option<Collected> {
        let mut guard = self.inner.lock().unwrap();
        loop {
            let now = self.now();
            if guard.is_complete(sample_id) || now >= deadline {
                return guard.try_collect(sample_id, now, deadline);
            }
            let wait = Duration::from_nanos(deadline - now);
            guard = self.changed.wait_timeout(guard, wait).unwrap().0;
        }
    }

    pub fn complete(&self, sample_id: u64) {
        self.inner.lock().unwrap().complete(sample_id);
    }

    pub fn stats(&self) -> BufferStats {
        self.inner.lock().unwrap().stats()
    }
}
