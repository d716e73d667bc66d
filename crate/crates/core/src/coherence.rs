//! Coherence arithmetic shared by sensor nodes, the loop node and the harness.

use std::fmt;

use thiserror::Error;

use crate::time::{Duration, Timestamp};

/// Payload reserved for values that could not be obtained at all.
pub const NULL_VALUE: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LoopId(pub u32);

impl fmt::Display for LoopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoherenceError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn invalid(msg: impl Into<String>) -> CoherenceError {
    CoherenceError::InvalidArgument(msg.into())
}

/// One sensor reading. `read_time` is taken from the reading node's own clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Sample {
    pub read_time: Timestamp,
    pub value: u64,
}

impl Sample {
    pub fn new(read_time: Timestamp, value: u64) -> Self {
        Sample { read_time, value }
    }

    pub fn null() -> Self {
        Sample {
            read_time: Timestamp::ZERO,
            value: NULL_VALUE,
        }
    }

    pub fn is_null(&self) -> bool {
        self.value == NULL_VALUE
    }
}

/// How a value slot of a tuple was filled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Validity {
    /// Joined by the owning node (or served from its evicted history).
    Fresh,
    /// Last value the fallback saw from this node.
    Cached,
    /// Value of a configured alternative sensor.
    Substituted,
    Null,
}

impl Validity {
    pub fn as_str(self) -> &'static str {
        match self {
            Validity::Fresh => "fresh",
            Validity::Cached => "cached",
            Validity::Substituted => "substituted",
            Validity::Null => "null",
        }
    }
}

/// A value slot of a request or result tuple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JoinedValue {
    pub node: NodeId,
    pub sample: Sample,
    /// Age at join time per the joining node's clock. Zero for compensated slots.
    pub age: Duration,
    /// Read time as reported to the loop node (mapped back when the latency reference is used).
    pub reported_time: Timestamp,
    pub validity: Validity,
}

impl JoinedValue {
    pub fn is_fresh(&self) -> bool {
        self.validity == Validity::Fresh
    }
}

/// Running extremes of ages and reported read times over the fresh values of a tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Extremes {
    pub alpha_min: Duration,
    pub alpha_max: Duration,
    pub t_min: Timestamp,
    pub t_max: Timestamp,
}

impl Extremes {
    pub fn single(age: Duration, t_i: Timestamp) -> Self {
        Extremes {
            alpha_min: age,
            alpha_max: age,
            t_min: t_i,
            t_max: t_i,
        }
    }

    pub fn absorb(&mut self, age: Duration, t_i: Timestamp) {
        self.alpha_min = self.alpha_min.min(age);
        self.alpha_max = self.alpha_max.max(age);
        self.t_min = self.t_min.min(t_i);
        self.t_max = self.t_max.max(t_i);
    }

    pub fn merged(a: Option<Extremes>, age: Duration, t_i: Timestamp) -> Extremes {
        match a {
            Some(mut e) => {
                e.absorb(age, t_i);
                e
            }
            None => Extremes::single(age, t_i),
        }
    }
}

/// Closed time interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Timestamp,
    pub hi: Timestamp,
}

impl Interval {
    pub fn new(lo: Timestamp, hi: Timestamp) -> Result<Self, CoherenceError> {
        if lo > hi {
            return Err(invalid(format!("interval lo {lo} > hi {hi}")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn diameter(&self) -> Duration {
        self.hi - self.lo
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// The interval that must contain the true read time of every fresh value
    /// joined while a tuple traveled from `start` to `end` on the trusted clock.
    pub fn guarantee(
        start: Timestamp,
        end: Timestamp,
        alpha_min: Duration,
        alpha_max: Duration,
    ) -> Interval {
        Interval {
            lo: start - alpha_max,
            hi: end - alpha_min,
        }
    }
}

/// `(l_e - alpha_min) - (l_s - alpha_max)`.
pub fn coherence_guarantee(
    l_s: Timestamp,
    l_e: Timestamp,
    alpha_min: Duration,
    alpha_max: Duration,
) -> Result<Duration, CoherenceError> {
    if l_e < l_s {
        return Err(invalid(format!("loop end {l_e} precedes loop start {l_s}")));
    }
    if alpha_min.is_negative() || alpha_max < alpha_min {
        return Err(invalid(format!(
            "age bounds must satisfy 0 <= alpha_min ({alpha_min}) <= alpha_max ({alpha_max})"
        )));
    }
    Ok((l_e - alpha_min) - (l_s - alpha_max))
}

/// `t_max - t_min`.
pub fn coherence_estimate(t_min: Timestamp, t_max: Timestamp) -> Result<Duration, CoherenceError> {
    if t_max < t_min {
        return Err(invalid(format!("t_max {t_max} < t_min {t_min}")));
    }
    Ok(t_max - t_min)
}

/// `max |t - t_i|` over the read times.
pub fn read_time_deviation(t: Timestamp, read_times: &[Timestamp]) -> Result<Duration, CoherenceError> {
    read_times
        .iter()
        .map(|&ti| (t - ti).abs())
        .max()
        .ok_or_else(|| invalid("read_times is empty"))
}

/// Request time translated into a sensor clock using the node's own `t_now`
/// and the estimated hop latencies from the loop node up to that sensor.
pub fn shifted_request_time(
    t: Timestamp,
    l_s: Timestamp,
    t_now: Timestamp,
    hop_latencies: &[Duration],
) -> Timestamp {
    let total: Duration = hop_latencies.iter().copied().sum();
    t_now + (t - l_s) - total
}

/// Maps a read time from the shifted frame back into the request frame.
pub fn unshift_read_time(t_i_local: Timestamp, t: Timestamp, t_shifted: Timestamp) -> Timestamp {
    t_i_local + (t - t_shifted)
}

/// Smallest single interval containing all inputs.
pub fn interval_hull(intervals: &[Interval]) -> Result<Interval, CoherenceError> {
    let first = intervals
        .first()
        .ok_or_else(|| invalid("interval list is empty"))?;
    if let Some(bad) = intervals.iter().find(|iv| iv.lo > iv.hi) {
        return Err(invalid(format!("malformed interval [{}, {}]", bad.lo, bad.hi)));
    }
    Ok(intervals.iter().skip(1).fold(*first, |acc, iv| Interval {
        lo: acc.lo.min(iv.lo),
        hi: acc.hi.max(iv.hi),
    }))
}
