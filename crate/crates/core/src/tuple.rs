//! Request and result tuples exchanged along a sensing loop.

use std::sync::Arc;

use crate::coherence::{Extremes, Interval, JoinedValue, LoopId, NodeId};
use crate::time::{Duration, Timestamp};

/// One planned stop of a request tuple.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Hop {
    Sensor(NodeId),
    /// Pass through the fallback node, which fills in the listed nodes.
    Fallback { skipped: Vec<NodeId> },
}

/// Where a tuple goes after the current holder is done with it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NextHop {
    Sensor(NodeId),
    Fallback,
    LoopNode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RequestTuple {
    pub seq: u64,
    pub origin_loop: LoopId,
    /// Desired read time (trusted clock).
    pub t: Timestamp,
    pub alpha: Duration,
    pub mu: f64,
    /// Age and read-time extremes of the fresh values in the current segment.
    pub extremes: Option<Extremes>,
    /// Read-time extremes over all fresh values of the tuple.
    pub t_bounds: Option<(Timestamp, Timestamp)>,
    pub values: Vec<JoinedValue>,
    pub route: Arc<[Hop]>,
    /// Index of the hop currently holding the tuple.
    pub cursor: usize,
    /// Dispatch time of the loop.
    pub l_s: Timestamp,
    /// Start of the current segment (dispatch or last collocated pass-through).
    pub seg_start: Timestamp,
    /// Closed segment intervals from earlier pass-throughs.
    pub segments: Vec<Interval>,
    /// Longest segment span so far.
    pub longest_segment: Duration,
    /// Hop time estimate in ns, used for the latency-based reference.
    pub hop_estimate: f64,
    pub hops_in_segment: u32,
    pub hops_total: u32,
    /// Every sensor must read ad hoc (initialization probe).
    pub adhoc: bool,
    pub degraded: bool,
}

impl RequestTuple {
    pub fn new(
        seq: u64,
        origin_loop: LoopId,
        t: Timestamp,
        l_s: Timestamp,
        alpha: Duration,
        mu: f64,
        route: Arc<[Hop]>,
        hop_estimate: f64,
    ) -> Self {
        RequestTuple {
            seq,
            origin_loop,
            t,
            alpha,
            mu,
            extremes: None,
            t_bounds: None,
            values: Vec::new(),
            route,
            cursor: 0,
            l_s,
            seg_start: l_s,
            segments: Vec::new(),
            longest_segment: Duration::ZERO,
            hop_estimate,
            hops_in_segment: 0,
            hops_total: 0,
            adhoc: false,
            degraded: false,
        }
    }

    pub fn current_hop(&self) -> Option<&Hop> {
        self.route.get(self.cursor)
    }

    /// The stop after the current one.
    pub fn next_hop(&self) -> NextHop {
        match self.route.get(self.cursor + 1) {
            Some(Hop::Sensor(id)) => NextHop::Sensor(*id),
            Some(Hop::Fallback { .. }) => NextHop::Fallback,
            None => NextHop::LoopNode,
        }
    }

    /// Sensors left in the route after the current stop, up to the next fallback hop.
    pub fn sensors_until_fallback(&self, from: usize) -> usize {
        self.route
            .iter()
            .skip(from)
            .take_while(|h| matches!(h, Hop::Sensor(_)))
            .count()
    }

    /// Records a fresh value and updates the extremes.
    pub fn push_fresh(&mut self, value: JoinedValue) {
        self.extremes = Some(Extremes::merged(self.extremes, value.age, value.reported_time));
        let t = value.reported_time;
        self.t_bounds = Some(match self.t_bounds {
            Some((lo, hi)) => (lo.min(t), hi.max(t)),
            None => (t, t),
        });
        self.values.push(value);
    }

    pub fn push_compensated(&mut self, value: JoinedValue) {
        self.values.push(value);
    }

    /// Closes the current segment at `end` (trusted clock) and starts a new one.
    pub fn close_segment(&mut self, end: Timestamp) {
        if let Some(e) = self.extremes.take() {
            self.segments
                .push(Interval::guarantee(self.seg_start, end, e.alpha_min, e.alpha_max));
        }
        self.longest_segment = self.longest_segment.max(end - self.seg_start);
        self.seg_start = end;
        self.hops_in_segment = 0;
    }

    /// Bands for the extended join cost: current-segment ages and tuple-wide read times.
    pub fn bands(&self) -> Option<Extremes> {
        let e = self.extremes?;
        let (t_min, t_max) = self.t_bounds.unwrap_or((e.t_min, e.t_max));
        Some(Extremes { t_min, t_max, ..e })
    }
}

/// Record emitted by the loop node for each completed request.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultTuple {
    pub seq: u64,
    pub t: Timestamp,
    pub l_s: Timestamp,
    pub emitted_at: Timestamp,
    pub c_g: Duration,
    pub c_e: Duration,
    pub delta: Duration,
    pub delta_t: Duration,
    pub d_max: Duration,
    pub values: Vec<JoinedValue>,
    pub loop_count: usize,
    pub degraded: bool,
    pub adhoc: bool,
    pub infeasible: bool,
}

impl ResultTuple {
    pub fn fresh_values(&self) -> impl Iterator<Item = &JoinedValue> {
        self.values.iter().filter(|v| v.is_fresh())
    }
}
