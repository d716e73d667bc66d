//! Bounded history of readings with join/send watermarks.

use std::collections::VecDeque;

use crate::coherence::Sample;
use crate::time::{Duration, Timestamp};

pub const DEFAULT_CAPACITY: usize = 256;

/// Result of recording a reading into a full buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Eviction {
    /// Nothing was overwritten.
    None,
    /// The overwritten entry was already consumed (read time at or before `W_send`).
    Consumed(Sample),
    /// The overwritten entry may still be needed and must go to the fallback node.
    ToFallback(Sample),
    /// Like `ToFallback`, but no fallback was reachable; the entry is lost.
    Lost(Sample),
}

/// `(evicted + neighbour) / 2`: the join watermark after evicting `evicted`.
pub fn join_watermark(evicted: Timestamp, neighbour: Timestamp) -> Timestamp {
    evicted.midpoint(neighbour)
}

/// Ring of readings ordered by read time, oldest first.
#[derive(Clone, Debug)]
pub struct HistoryBuffer {
    entries: VecDeque<Sample>,
    capacity: usize,
    w_join: Timestamp,
    w_send: Timestamp,
    degraded: bool,
}

impl HistoryBuffer {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        HistoryBuffer {
            entries: VecDeque::with_capacity(capacity),
            capacity,
            w_join: Timestamp::MIN,
            w_send: Timestamp::MIN,
            degraded: false,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &Sample> + Clone {
        self.entries.iter()
    }

    pub fn oldest(&self) -> Option<Sample> {
        self.entries.front().copied()
    }

    pub fn newest(&self) -> Option<Sample> {
        self.entries.back().copied()
    }

    pub fn w_join(&self) -> Timestamp {
        self.w_join
    }

    pub fn w_send(&self) -> Timestamp {
        self.w_send
    }

    pub fn is_degraded(&self) -> bool {
        self.degraded
    }

    /// Requests for times before `W_join` need values handed to the fallback.
    pub fn needs_fallback(&self, t: Timestamp) -> bool {
        t < self.w_join
    }

    /// `W_send <- min(t_now - alpha, t)` after joining a request.
    pub fn note_join(&mut self, t_now: Timestamp, alpha: Duration, t: Timestamp) {
        self.w_send = (t_now - alpha).min(t);
    }

    /// Appends a reading, overwriting the oldest entry when full.
    pub fn record(&mut self, sample: Sample, fallback_reachable: bool) -> Eviction {
        let eviction = if self.entries.len() >= self.capacity {
            let old = self.entries.pop_front().expect("full buffer has entries");
            if old.read_time > self.w_send {
                if fallback_reachable {
                    let neighbour = self.entries.front().map_or(sample.read_time, |s| s.read_time);
                    self.w_join = self.w_join.max(join_watermark(old.read_time, neighbour));
                    Eviction::ToFallback(old)
                } else {
                    self.degraded = true;
                    Eviction::Lost(old)
                }
            } else {
                Eviction::Consumed(old)
            }
        } else {
            Eviction::None
        };
        self.entries.push_back(sample);
        eviction
    }

    /// Silently drops entries older than `now - horizon` that are already consumed.
    pub fn expire(&mut self, now: Timestamp, horizon: Duration) -> usize {
        let cutoff = now - horizon;
        let mut dropped = 0;
        while let Some(front) = self.entries.front() {
            if front.read_time < cutoff && front.read_time <= self.w_send && self.entries.len() > 1 {
                self.entries.pop_front();
                dropped += 1;
            } else {
                break;
            }
        }
        dropped
    }

    /// Forgets everything (node restart).
    pub fn reset(&mut self) {
        self.entries.clear();
        self.w_join = Timestamp::MIN;
        self.w_send = Timestamp::MIN;
        self.degraded = false;
    }
}
