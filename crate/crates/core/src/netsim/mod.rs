//! Deterministic discrete-event simulation of sensors, links, the loop node
//! and the fallback node, with ground-truth read times.

pub mod engine;
pub mod event;
pub mod link;

pub use engine::{run, Emitted, FailureKind, FailureSpec, SimConfig, SimError, SimOutput, Simulation};
pub use event::EventQueue;
pub use link::{Jitter, LinkError, LinkModel};

use crate::coherence::{NodeId, NULL_VALUE};
use crate::time::{Duration, Timestamp};
use crate::tuple::ResultTuple;

/// True read time of one sensor reading. The reading's payload is its index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroundRead {
    pub node: NodeId,
    pub at: Timestamp,
}

/// Append-only log of every sensor read on the global clock.
#[derive(Clone, Debug, Default)]
pub struct GroundTruth {
    reads: Vec<GroundRead>,
}

impl GroundTruth {
    /// Records a read and returns the payload that identifies it.
    pub fn record(&mut self, node: NodeId, at: Timestamp) -> u64 {
        self.reads.push(GroundRead { node, at });
        (self.reads.len() - 1) as u64
    }

    pub fn get(&self, payload: u64) -> Option<&GroundRead> {
        if payload == NULL_VALUE {
            return None;
        }
        self.reads.get(payload as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundRead> {
        self.reads.iter()
    }

    pub fn len(&self) -> usize {
        self.reads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty()
    }

    /// Span of true read times over the fresh values of `result`.
    pub fn coherence(&self, result: &ResultTuple) -> Option<Duration> {
        let times: Vec<Timestamp> = result
            .fresh_values()
            .filter_map(|v| self.get(v.sample.value).map(|g| g.at))
            .collect();
        let lo = times.iter().min()?;
        let hi = times.iter().max()?;
        Some(*hi - *lo)
    }
}
