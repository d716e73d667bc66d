//! Sensor-node state machine: buffer, read scheduling and the tuple join.

pub mod buffer;
pub mod join;
pub mod schedule;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::coherence::{shifted_request_time, Extremes, JoinedValue, NodeId, Sample, Validity};
use crate::loop_node::tuning::optimal_read_time;
use crate::time::{Duration, Timestamp};
use crate::tuple::RequestTuple;

pub use buffer::{Eviction, HistoryBuffer};
pub use join::{join_cost, select_value, JoinParams};
pub use schedule::{next_read_time, NextRequest, SchedulerKind};

/// Frame in which a node interprets the request time `t`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinReference {
    /// Use `t` as is, trusting the local clock.
    #[default]
    Clock,
    /// Translate `t` using the node's own `t_now` and estimated hop latencies.
    Latency,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorConfig {
    pub scheduler: SchedulerKind,
    pub buffer_capacity: usize,
    /// Consumed entries older than this are dropped.
    pub expiry_horizon: Duration,
    pub reference: JoinReference,
    pub banded: bool,
    pub adhoc_capable: bool,
    /// Request cadence of the loop node, used to anticipate upcoming requests.
    pub request_period: Duration,
}

/// A tuple that must be completed by the fallback from this node's evicted history.
#[derive(Clone, Debug, PartialEq)]
pub struct OverflowRequest {
    pub owner: NodeId,
    pub params: JoinParams,
    /// Offset added to local read times before reporting them.
    pub shift: Duration,
    /// Best candidate still held locally.
    pub local_best: Option<Sample>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum JoinOutcome {
    /// Value appended; forward along the route.
    Joined,
    /// Route to the fallback node for evicted values.
    Overflow(OverflowRequest),
}

#[derive(Clone, Debug, PartialEq)]
pub struct JoinReport {
    pub outcome: JoinOutcome,
    /// Entries evicted by ad-hoc reads that must be handed to the fallback.
    pub evictions: Vec<Sample>,
    /// Local times at which reads should be scheduled.
    pub planned_reads: Vec<Timestamp>,
}

pub struct SensorNode {
    id: NodeId,
    config: SensorConfig,
    buffer: HistoryBuffer,
    last_hint: Option<Timestamp>,
    snr_planned_upto: Option<u64>,
    reads: u64,
}

/// Source of ad-hoc readings; returns a sample taken at the node's current time.
pub trait SensorReader {
    fn read_now(&mut self) -> Sample;
}

impl<F: FnMut() -> Sample> SensorReader for F {
    fn read_now(&mut self) -> Sample {
        self()
    }
}

impl SensorNode {
    pub fn new(id: NodeId, config: SensorConfig) -> Self {
        let buffer = HistoryBuffer::new(config.buffer_capacity);
        SensorNode {
            id,
            config,
            buffer,
            last_hint: None,
            snr_planned_upto: None,
            reads: 0,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn config(&self) -> &SensorConfig {
        &self.config
    }

    pub fn buffer(&self) -> &HistoryBuffer {
        &self.buffer
    }

    pub fn reads(&self) -> u64 {
        self.reads
    }

    /// Restart after a crash: volatile state is gone.
    pub fn reset(&mut self) {
        self.buffer.reset();
        self.last_hint = None;
        self.snr_planned_upto = None;
    }

    /// Stores a reading. Returns the entry to hand to the fallback, if any.
    pub fn record_reading(&mut self, sample: Sample, fallback_reachable: bool) -> Eviction {
        self.reads += 1;
        self.buffer.record(sample, fallback_reachable)
    }

    /// First timer after boot, in local time.
    pub fn first_timer(&self, local_now: Timestamp) -> Option<Timestamp> {
        match self.config.scheduler {
            SchedulerKind::AdHoc => None,
            SchedulerKind::Periodic { period } => Some(schedule::next_boundary(local_now, period)),
            SchedulerKind::ScheduleNextRead { fallback_period, .. } => {
                Some(schedule::next_boundary(local_now, fallback_period) + fallback_period)
            }
        }
    }

    /// Handles a timer that was due at local time `due`. Returns whether to
    /// read now and the next timer's local time.
    pub fn on_timer(&self, due: Timestamp, local_now: Timestamp) -> (bool, Option<Timestamp>) {
        match self.config.scheduler {
            SchedulerKind::AdHoc => (false, None),
            SchedulerKind::Periodic { period } => (true, Some(due + period)),
            SchedulerKind::ScheduleNextRead { fallback_period, .. } => {
                let stale = self
                    .last_hint
                    .is_none_or(|h| local_now - h >= fallback_period);
                (stale, Some(due + fallback_period))
            }
        }
    }

    fn frame(&self, tuple: &RequestTuple, t_now: Timestamp) -> (Timestamp, Duration) {
        match self.config.reference {
            JoinReference::Clock => (tuple.t, Duration::ZERO),
            JoinReference::Latency => {
                let hop = Duration(tuple.hop_estimate.round() as i64);
                let hops = vec![hop; tuple.hops_in_segment as usize];
                let shifted = shifted_request_time(tuple.t, tuple.seg_start, t_now, &hops);
                (shifted, tuple.t - shifted)
            }
        }
    }

    fn params(&self, tuple: &RequestTuple, t_ref: Timestamp, shift: Duration, t_now: Timestamp) -> JoinParams {
        let bands = if self.config.banded {
            tuple.bands().map(|b| Extremes {
                t_min: b.t_min - shift,
                t_max: b.t_max - shift,
                ..b
            })
        } else {
            None
        };
        JoinParams {
            t: t_ref,
            t_now,
            alpha: tuple.alpha,
            mu: tuple.mu,
            bands,
        }
    }

    fn adhoc_read(&mut self, reader: &mut dyn SensorReader, evictions: &mut Vec<Sample>) -> Sample {
        let sample = reader.read_now();
        if let Eviction::ToFallback(old) = self.record_reading(sample, true) {
            evictions.push(old);
        }
        sample
    }

    /// Joins `tuple` at local time `t_now`.
    pub fn process_request(
        &mut self,
        tuple: &mut RequestTuple,
        t_now: Timestamp,
        reader: &mut dyn SensorReader,
    ) -> JoinReport {
        let (t_ref, shift) = self.frame(tuple, t_now);
        let params = self.params(tuple, t_ref, shift, t_now);
        let mut evictions = Vec::new();
        self.buffer.expire(t_now, self.config.expiry_horizon);

        let adhoc = matches!(self.config.scheduler, SchedulerKind::AdHoc) || tuple.adhoc;
        let chosen = if adhoc && self.config.adhoc_capable {
            Some(self.adhoc_read(reader, &mut evictions))
        } else if self.buffer.needs_fallback(t_ref) {
            let local_best = select_value(self.buffer.entries(), &params);
            self.buffer.note_join(t_now, tuple.alpha, t_ref);
            return JoinReport {
                outcome: JoinOutcome::Overflow(OverflowRequest {
                    owner: self.id,
                    params,
                    shift,
                    local_best,
                }),
                evictions,
                planned_reads: Vec::new(),
            };
        } else {
            match select_value(self.buffer.entries(), &params) {
                Some(s) => Some(s),
                None if self.config.adhoc_capable => Some(self.adhoc_read(reader, &mut evictions)),
                None => None,
            }
        };

        match chosen {
            Some(sample) => tuple.push_fresh(JoinedValue {
                node: self.id,
                sample,
                age: t_now - sample.read_time,
                reported_time: sample.read_time + shift,
                validity: Validity::Fresh,
            }),
            None => {
                tuple.degraded = true;
                tuple.push_compensated(JoinedValue {
                    node: self.id,
                    sample: Sample::null(),
                    age: Duration::ZERO,
                    reported_time: tuple.t,
                    validity: Validity::Null,
                });
            }
        }
        self.buffer.note_join(t_now, tuple.alpha, t_ref);

        let planned_reads = if tuple.adhoc {
            Vec::new()
        } else {
            self.plan_next(tuple.seq, t_ref, t_now, tuple.alpha, tuple.mu)
        };
        JoinReport {
            outcome: JoinOutcome::Joined,
            evictions,
            planned_reads,
        }
    }

    /// Schedule-next-read: one read (plus extras) at the optimum of the first
    /// upcoming request whose optimum still lies in the future.
    fn plan_next(&mut self, seq: u64, t_ref: Timestamp, t_now: Timestamp, alpha: Duration, mu: f64) -> Vec<Timestamp> {
        let SchedulerKind::ScheduleNextRead {
            jitter,
            extra_samples,
            ..
        } = self.config.scheduler
        else {
            return Vec::new();
        };
        self.last_hint = Some(t_now);
        let period = self.config.request_period;
        if period <= Duration::ZERO {
            return Vec::new();
        }
        let current = optimal_read_time(t_ref, t_now, alpha, mu);
        let lag = (t_now - current).as_nanos().max(0) / period.as_nanos() + 1;
        let target_seq = seq + lag as u64;
        if self.snr_planned_upto.is_some_and(|s| s >= target_seq) {
            return Vec::new();
        }
        self.snr_planned_upto = Some(target_seq);
        let hint = NextRequest {
            t: t_ref + period * lag,
            expected_t_now: t_now + period * lag,
            alpha,
            mu,
        };
        let optimum = next_read_time(&self.config.scheduler, t_now, Some(&hint)).unwrap_or(hint.t);
        // the extra-sample draws only need to be spread, not random per node
        let seed = (self.id.0 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ target_seq;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        schedule::snr_reads(optimum, jitter, extra_samples, &mut rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::LoopId;
    use crate::tuple::Hop;
    use std::sync::Arc;

    fn cfg(scheduler: SchedulerKind) -> SensorConfig {
        SensorConfig {
            scheduler,
            buffer_capacity: 16,
            expiry_horizon: Duration::from_secs(100),
            reference: JoinReference::Clock,
            banded: false,
            adhoc_capable: true,
            request_period: Duration::from_millis(100),
        }
    }

    fn tuple(t: i64, alpha: i64, mu: f64) -> RequestTuple {
        let route: Arc<[Hop]> = vec![Hop::Sensor(NodeId(0)), Hop::Sensor(NodeId(1)), Hop::Sensor(NodeId(2))].into();
        RequestTuple::new(0, LoopId(0), Timestamp(t), Timestamp(t), Duration(alpha), mu, route, 1.0)
    }

    struct NoReads;
    impl SensorReader for NoReads {
        fn read_now(&mut self) -> Sample {
            panic!("unexpected ad-hoc read")
        }
    }

    #[test]
    fn first_node_sets_single_value_extremes() {
        let mut n = SensorNode::new(NodeId(0), cfg(SchedulerKind::Periodic { period: Duration(10) }));
        for t in [80, 90, 100] {
            n.record_reading(Sample::new(Timestamp(t), t as u64), true);
        }
        let mut tup = tuple(100, 10, 1.0);
        n.process_request(&mut tup, Timestamp(105), &mut NoReads);
        let e = tup.extremes.unwrap();
        assert_eq!(e.alpha_min, e.alpha_max);
        assert_eq!(e.t_min, e.t_max);
        assert_eq!(e.alpha_min, Timestamp(105) - e.t_min);
    }

    #[test]
    fn three_nodes_aggregate_ages() {
        let mut tup = tuple(0, 0, 0.0);
        for (i, age) in [1i64, 2, 3].into_iter().enumerate() {
            let mut n = SensorNode::new(NodeId(i as u32), cfg(SchedulerKind::Periodic { period: Duration(10) }));
            n.record_reading(Sample::new(Timestamp(0), 7), true);
            n.process_request(&mut tup, Timestamp(age), &mut NoReads);
        }
        let e = tup.extremes.unwrap();
        assert_eq!((e.alpha_min, e.alpha_max), (Duration(1), Duration(3)));
    }

    #[test]
    fn request_before_join_watermark_goes_to_fallback() {
        let mut c = cfg(SchedulerKind::Periodic { period: Duration(10) });
        c.buffer_capacity = 2;
        let mut n = SensorNode::new(NodeId(4), c);
        for t in [10, 20, 30] {
            n.record_reading(Sample::new(Timestamp(t), t as u64), true);
        }
        assert_eq!(n.buffer().w_join(), Timestamp(15));
        let mut tup = tuple(12, 0, 0.0);
        let before = tup.clone();
        let report = n.process_request(&mut tup, Timestamp(40), &mut NoReads);
        assert!(matches!(report.outcome, JoinOutcome::Overflow(_)));
        assert_eq!(tup.values, before.values);
    }

    #[test]
    fn adhoc_joins_with_zero_age() {
        let mut n = SensorNode::new(NodeId(0), cfg(SchedulerKind::AdHoc));
        let mut tup = tuple(0, 50, 1.0);
        let mut reader = || Sample::new(Timestamp(77), 1);
        n.process_request(&mut tup, Timestamp(77), &mut reader);
        assert_eq!(tup.values[0].age, Duration::ZERO);
        assert_eq!(n.reads(), 1);
    }

    #[test]
    fn empty_buffer_without_adhoc_yields_null() {
        let mut c = cfg(SchedulerKind::Periodic { period: Duration(10) });
        c.adhoc_capable = false;
        let mut n = SensorNode::new(NodeId(0), c);
        let mut tup = tuple(0, 0, 1.0);
        n.process_request(&mut tup, Timestamp(5), &mut NoReads);
        assert!(tup.degraded);
        assert_eq!(tup.values[0].validity, Validity::Null);
        assert!(tup.extremes.is_none());
    }

    #[test]
    fn snr_plans_one_read_per_request() {
        let mut n = SensorNode::new(NodeId(0), cfg(SchedulerKind::snr()));
        n.record_reading(Sample::new(Timestamp(0), 0), true);
        let mut planned = Vec::new();
        for k in 0..10u64 {
            let t = 1_000 + k as i64 * 100_000_000;
            let mut tup = tuple(t, 30_000_000, 0.0);
            tup.seq = k;
            let report = n.process_request(&mut tup, Timestamp(t + 30_000_000), &mut NoReads);
            planned.extend(report.planned_reads);
        }
        assert_eq!(planned.len(), 10);
        assert_eq!(planned[0], Timestamp(1_000 + 100_000_000));
    }
}
