//! Bounded segment queue between actors and the learner, with staleness control.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};

use rand::Rng;

use super::segment::TrajectorySegment;
use crate::{Error, Result};

/// How the buffer hands segments to the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferMode {
    /// On-policy: a batch drains the oldest segments, each consumed once.
    Fifo,
    /// Off-policy: a ring the learner samples from with replacement.
    Replay,
}

#[derive(Debug, Clone)]
pub struct BufferConfig {
    pub horizon: usize,
    pub batch_segments: usize,
    pub capacity: usize,
    /// Batches whose mean version gap exceeds this are trimmed; a mean gap
    /// exactly equal to it is accepted.
    pub max_avg_version_gap: u64,
    pub mode: BufferMode,
}

impl Default for BufferConfig {
    fn default() -> Self {
        Self {
            horizon: 32,
            batch_segments: 64,
            capacity: 256,
            max_avg_version_gap: 8,
            mode: BufferMode::Fifo,
        }
    }
}

impl BufferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("buffer horizon must be at least 1".into()));
        }
        if self.batch_segments == 0 {
            return Err(Error::Config("batch_segments must be at least 1".into()));
        }
        if self.capacity < self.batch_segments {
            return Err(Error::Config(format!(
                "buffer capacity {} is smaller than batch_segments {}",
                self.capacity, self.batch_segments
            )));
        }
        Ok(())
    }
}

/// Lifetime counters; `produced == consumed + discarded + queued` always.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BufferStats {
    pub produced: u64,
    pub consumed: u64,
    pub discarded: u64,
    pub queued: u64,
}

struct Inner {
    queue: VecDeque<TrajectorySegment>,
    produced: u64,
    consumed: u64,
    discarded: u64,
    closed: bool,
    last_batch_mean_gap: f64,
}

/// Thread-safe segment store. Actors `push`, the learner `sample_batch`
/// (blocking) or `try_sample_batch`. Over-capacity pushes and stale batch
/// candidates evict the oldest segment, counted as discarded.
pub struct SegmentBuffer {
    cfg: BufferConfig,
    inner: Mutex<Inner>,
    cond: Condvar,
}

impl SegmentBuffer {
    pub fn new(cfg: BufferConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            inner: Mutex::new(Inner {
                queue: VecDeque::new(),
                produced: 0,
                consumed: 0,
                discarded: 0,
                closed: false,
                last_batch_mean_gap: 0.0,
            }),
            cond: Condvar::new(),
        })
    }

    pub fn config(&self) -> &BufferConfig {
        &self.cfg
    }

    /// Append a segment. Returns Ok(false) without storing once the buffer is
    /// closed; a full buffer evicts its oldest entry first (counted discarded).
    pub fn push(&self, seg: TrajectorySegment) -> Result<bool> {
        seg.validate(self.cfg.horizon)?;
        let mut inner = self.inner.lock().unwrap();
        if inner.closed {
            return Ok(false);
        }
        if inner.queue.len() >= self.cfg.capacity {
            inner.queue.pop_front();
            inner.discarded += 1;
        }
        inner.produced += 1;
        inner.queue.push_back(seg);
        drop(inner);
        self.cond.notify_all();
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> BufferStats {
        let inner = self.inner.lock().unwrap();
        BufferStats {
            produced: inner.produced,
            consumed: inner.consumed,
            discarded: inner.discarded,
            queued: inner.queue.len() as u64,
        }
    }

    pub fn last_batch_mean_gap(&self) -> f64 {
        self.inner.lock().unwrap().last_batch_mean_gap
    }

    /// Wake all waiters and refuse further work. Queued segments remain
    /// drainable by non-blocking calls.
    pub fn close(&self) {
        self.inner.lock().unwrap().closed = true;
        self.cond.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.inner.lock().unwrap().closed
    }

    fn mean_gap(head: &VecDeque<TrajectorySegment>, take: usize, current_version: u64) -> f64 {
        let take = take.min(head.len());
        if take == 0 {
            return 0.0;
        }
        let total: u64 = head
            .iter()
            .take(take)
            .map(|s| current_version.saturating_sub(s.model_version))
            .sum();
        total as f64 / take as f64
    }

    /// Staleness loop: while the mean version gap over the oldest
    /// `min(batch_segments, len)` segments strictly exceeds the threshold,
    /// evict the single oldest segment and re-evaluate. Returns evictions.
    fn evict_stale_locked(&self, inner: &mut Inner, current_version: u64) -> u64 {
        let mut evicted = 0;
        loop {
            let take = self.cfg.batch_segments.min(inner.queue.len());
            if take == 0 {
                break;
            }
            let mean = Self::mean_gap(&inner.queue, take, current_version);
            if mean > self.cfg.max_avg_version_gap as f64 {
                inner.queue.pop_front();
                inner.discarded += 1;
                evicted += 1;
            } else {
                break;
            }
        }
        evicted
    }

    /// Run the staleness loop outside of sampling (exposed for tests and for
    /// pre-update hygiene). Returns how many segments were discarded.
    pub fn enforce_staleness(&self, current_version: u64) -> u64 {
        let mut inner = self.inner.lock().unwrap();
        let evicted = self.evict_stale_locked(&mut inner, current_version);
        if evicted > 0 {
            drop(inner);
            self.cond.notify_all(); // room opened up: wake paced producers
        }
        evicted
    }

    fn drain_locked(&self, inner: &mut Inner, current_version: u64) -> Vec<TrajectorySegment> {
        let n = self.cfg.batch_segments;
        inner.last_batch_mean_gap = Self::mean_gap(&inner.queue, n, current_version);
        let batch: Vec<TrajectorySegment> = inner.queue.drain(..n).collect();
        inner.consumed += n as u64;
        batch
    }

    /// Blocking FIFO sample: waits until, after staleness eviction, at least
    /// `batch_segments` fresh-enough segments are queued, then drains exactly
    /// that many (oldest first). Returns None once the buffer is closed and
    /// can no longer fill a batch.
    pub fn sample_batch(&self, current_version: u64) -> Result<Option<Vec<TrajectorySegment>>> {
        if self.cfg.mode != BufferMode::Fifo {
            return Err(Error::Runtime(
                "sample_batch is only available in FIFO mode".into(),
            ));
        }
        let mut inner = self.inner.lock().unwrap();
        loop {
            self.evict_stale_locked(&mut inner, current_version);
            if inner.queue.len() >= self.cfg.batch_segments {
                return Ok(Some(self.drain_locked(&mut inner, current_version)));
            }
            if inner.closed {
                return Ok(None);
            }
            inner = self.cond.wait(inner).unwrap();
        }
    }

    /// Non-blocking variant of `sample_batch`.
    pub fn try_sample_batch(&self, current_version: u64) -> Result<Option<Vec<TrajectorySegment>>> {
        if self.cfg.mode != BufferMode::Fifo {
            return Err(Error::Runtime(
                "try_sample_batch is only available in FIFO mode".into(),
            ));
        }
        let mut inner = self.inner.lock().unwrap();
        self.evict_stale_locked(&mut inner, current_version);
        if inner.queue.len() >= self.cfg.batch_segments {
            Ok(Some(self.drain_locked(&mut inner, current_version)))
        } else {
            Ok(None)
        }
    }

    /// Producer-side pacing gate: block while the FIFO queue sits at
    /// capacity, so actors stop simulating experience that displacement would
    /// immediately discard. Returns true once there is room — immediately in
    /// replay mode, where displacing old experience is the point — and false
    /// once the buffer closes.
    pub fn wait_for_room(&self) -> bool {
        if self.cfg.mode != BufferMode::Fifo {
            return true;
        }
        let mut inner = self.inner.lock().unwrap();
        loop {
            if inner.closed {
                return false;
            }
            if inner.queue.len() < self.cfg.capacity {
                return true;
            }
            inner = self.cond.wait(inner).unwrap();
        }
    }

    /// Block until at least `min_len` segments are queued (for replay warm-up).
    /// Returns false if the buffer closed first without reaching it.
    pub fn wait_for(&self, min_len: usize) -> bool {
        let mut inner = self.inner.lock().unwrap();
        loop {
            if inner.queue.len() >= min_len {
                return true;
            }
            if inner.closed {
                return false;
            }
            inner = self.cond.wait(inner).unwrap();
        }
    }

    /// Replay sample: clones `count` segments uniformly with replacement.
    /// Segments stay queued (they are only displaced by capacity pressure).
    pub fn sample_replay<R: Rng>(&self, count: usize, rng: &mut R) -> Result<Vec<TrajectorySegment>> {
        if self.cfg.mode != BufferMode::Replay {
            return Err(Error::Runtime(
                "sample_replay is only available in replay mode".into(),
            ));
        }
        let inner = self.inner.lock().unwrap();
        if inner.queue.is_empty() {
            return Err(Error::Runtime("replay buffer is empty".into()));
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let i = rng.gen_range(0..inner.queue.len());
            out.push(inner.queue[i].clone());
        }
        Ok(out)
    }
}
