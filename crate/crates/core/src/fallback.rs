//! Fallback node: reroutes tuples around unreachable sensors, fills in the
//! missing values, and serves joins from evicted buffer history.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::coherence::{JoinedValue, NodeId, Sample, Validity};
use crate::loop_node::tuning::segment_alpha;
use crate::sensor_node::{select_value, OverflowRequest};
use crate::time::{Duration, Timestamp};
use crate::tuple::{Hop, NextHop, RequestTuple, ResultTuple};

#[derive(Clone, Debug, PartialEq)]
pub struct FallbackConfig {
    /// Runs on the loop node's host; every pass-through starts a new segment.
    pub collocated: bool,
    /// Cached values older than this are not used.
    pub staleness: Duration,
    pub recheck_period: Duration,
    pub alternatives: BTreeMap<NodeId, NodeId>,
    /// Evicted samples kept per node.
    pub store_capacity: usize,
}

impl FallbackConfig {
    pub fn for_period(request_period: Duration) -> Self {
        FallbackConfig {
            collocated: true,
            staleness: request_period * 2,
            recheck_period: request_period * 10,
            alternatives: BTreeMap::new(),
            store_capacity: 4096,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct CacheEntry {
    value: JoinedValue,
    /// Earliest trusted time at which the value could have been read.
    read_bound: Timestamp,
}

/// Why a tuple reached the fallback.
#[derive(Clone, Debug, PartialEq)]
pub enum Arrival {
    /// The route lists a fallback hop at the cursor.
    Planned,
    /// Delivery to the hop at this route index was not acknowledged.
    Failed { hop_index: usize },
    /// The sensor at the cursor needs a value from its evicted history.
    Overflow(OverflowRequest),
}

#[derive(Clone, Debug)]
pub struct FallbackState {
    config: FallbackConfig,
    evicted: BTreeMap<NodeId, VecDeque<Sample>>,
    cache: BTreeMap<NodeId, CacheEntry>,
    unreachable: BTreeSet<NodeId>,
    passes: u64,
}

impl FallbackState {
    pub fn new(config: FallbackConfig) -> Self {
        FallbackState {
            config,
            evicted: BTreeMap::new(),
            cache: BTreeMap::new(),
            unreachable: BTreeSet::new(),
            passes: 0,
        }
    }

    pub fn config(&self) -> &FallbackConfig {
        &self.config
    }

    pub fn unreachable(&self) -> &BTreeSet<NodeId> {
        &self.unreachable
    }

    pub fn is_unreachable(&self, id: NodeId) -> bool {
        self.unreachable.contains(&id)
    }

    /// Number of tuples that went through this node.
    pub fn passes(&self) -> u64 {
        self.passes
    }

    pub fn mark_unreachable(&mut self, id: NodeId) -> bool {
        self.unreachable.insert(id)
    }

    /// A recheck probe was acknowledged.
    pub fn mark_reachable(&mut self, id: NodeId) -> bool {
        self.unreachable.remove(&id)
    }

    pub fn evicted(&self, id: NodeId) -> impl Iterator<Item = &Sample> {
        self.evicted.get(&id).into_iter().flatten()
    }

    /// Stores a sample evicted from `owner`'s buffer before it was consumed.
    pub fn store_eviction(&mut self, owner: NodeId, sample: Sample) {
        let cap = self.config.store_capacity.max(1);
        let store = self.evicted.entry(owner).or_default();
        let pos = store.partition_point(|s| s.read_time <= sample.read_time);
        store.insert(pos, sample);
        while store.len() > cap {
            store.pop_front();
        }
    }

    /// Refreshes the value cache from an emitted tuple.
    pub fn observe_result(&mut self, result: &ResultTuple) {
        for v in result.fresh_values() {
            let entry = CacheEntry {
                value: *v,
                read_bound: result.l_s - v.age,
            };
            match self.cache.get(&v.node) {
                Some(old) if old.read_bound >= entry.read_bound => {}
                _ => {
                    self.cache.insert(v.node, entry);
                }
            }
        }
    }

    fn fresh_cache(&self, id: NodeId, now: Timestamp) -> Option<&CacheEntry> {
        self.cache
            .get(&id)
            .filter(|c| now - c.read_bound <= self.config.staleness)
    }

    /// Value for an unreachable node: fresh cache, then the configured
    /// alternative sensor, then a null marker.
    pub fn compensate_missing(&self, id: NodeId, now: Timestamp, current: &[JoinedValue]) -> JoinedValue {
        if let Some(c) = self.fresh_cache(id, now) {
            return JoinedValue {
                node: id,
                age: now - c.read_bound,
                validity: Validity::Cached,
                ..c.value
            };
        }
        if let Some(&alt) = self.config.alternatives.get(&id) {
            let in_tuple = current.iter().find(|v| v.node == alt && v.is_fresh()).copied();
            let cached = || self.fresh_cache(alt, now).map(|c| c.value);
            if let Some(v) = in_tuple.or_else(cached) {
                return JoinedValue {
                    node: id,
                    validity: Validity::Substituted,
                    ..v
                };
            }
        }
        JoinedValue {
            node: id,
            sample: Sample::null(),
            age: Duration::ZERO,
            reported_time: now,
            validity: Validity::Null,
        }
    }

    fn compensate_into(&self, id: NodeId, tuple: &mut RequestTuple, now: Timestamp) {
        let v = self.compensate_missing(id, now, &tuple.values);
        if v.validity == Validity::Null {
            tuple.degraded = true;
        }
        tuple.push_compensated(v);
    }

    /// Best evicted value for an overflow request, considering the owner's
    /// remaining local candidate too.
    pub fn serve_overflow(&self, req: &OverflowRequest) -> Option<Sample> {
        let store = self.evicted(req.owner);
        select_value(store.chain(req.local_best.iter()), &req.params)
    }

    /// Handles a tuple at the fallback at trusted time `now` and returns where
    /// to send it next. Consecutive unreachable sensors are skipped.
    pub fn pass_through(&mut self, tuple: &mut RequestTuple, arrival: Arrival, now: Timestamp) -> NextHop {
        self.passes += 1;
        match arrival {
            Arrival::Planned => {
                if let Some(Hop::Fallback { skipped }) = tuple.current_hop().cloned() {
                    for id in skipped {
                        self.compensate_into(id, tuple, now);
                    }
                }
            }
            Arrival::Failed { hop_index } => {
                tuple.cursor = hop_index;
                match tuple.current_hop().cloned() {
                    Some(Hop::Sensor(id)) => {
                        self.mark_unreachable(id);
                        self.compensate_into(id, tuple, now);
                    }
                    Some(Hop::Fallback { skipped }) => {
                        for id in skipped {
                            self.compensate_into(id, tuple, now);
                        }
                    }
                    None => {}
                }
            }
            Arrival::Overflow(req) => match self.serve_overflow(&req) {
                Some(sample) => tuple.push_fresh(JoinedValue {
                    node: req.owner,
                    sample,
                    age: req.params.t_now - sample.read_time,
                    reported_time: sample.read_time + req.shift,
                    validity: Validity::Fresh,
                }),
                None => self.compensate_into(req.owner, tuple, now),
            },
        }

        // skip successors already known to be down
        while let NextHop::Sensor(id) = tuple.next_hop() {
            if !self.is_unreachable(id) {
                break;
            }
            tuple.cursor += 1;
            self.compensate_into(id, tuple, now);
        }

        if self.config.collocated {
            tuple.close_segment(now);
            let sensors = tuple.sensors_until_fallback(tuple.cursor + 1);
            tuple.alpha = segment_alpha(tuple.hop_estimate, sensors, now, tuple.t);
        }
        tuple.next_hop()
    }
}

/// Route over `nodes` with runs of unreachable nodes replaced by fallback hops.
pub fn build_route(nodes: &[NodeId], unreachable: &BTreeSet<NodeId>) -> Vec<Hop> {
    let mut route = Vec::with_capacity(nodes.len());
    for &id in nodes {
        if unreachable.contains(&id) {
            match route.last_mut() {
                Some(Hop::Fallback { skipped }) => skipped.push(id),
                _ => route.push(Hop::Fallback { skipped: vec![id] }),
            }
        } else {
            route.push(Hop::Sensor(id));
        }
    }
    route
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::LoopId;
    use crate::sensor_node::JoinParams;
    use std::sync::Arc;

    fn ids(r: std::ops::Range<u32>) -> Vec<NodeId> {
        r.map(NodeId).collect()
    }

    fn tuple(route: Vec<Hop>) -> RequestTuple {
        RequestTuple::new(0, LoopId(0), Timestamp(0), Timestamp(0), Duration(0), 1.0, Arc::from(route), 1_000.0)
    }

    fn fresh(node: u32, read: i64) -> JoinedValue {
        JoinedValue {
            node: NodeId(node),
            sample: Sample::new(Timestamp(read), read as u64),
            age: Duration(5),
            reported_time: Timestamp(read),
            validity: Validity::Fresh,
        }
    }

    fn state() -> FallbackState {
        FallbackState::new(FallbackConfig::for_period(Duration(1_000)))
    }

    #[test]
    fn single_failure_is_one_fallback_hop() {
        let down: BTreeSet<_> = [NodeId(47)].into();
        let route = build_route(&ids(0..100), &down);
        assert_eq!(route.len(), 100);
        assert_eq!(route[46], Hop::Sensor(NodeId(46)));
        assert_eq!(route[47], Hop::Fallback { skipped: vec![NodeId(47)] });
        assert_eq!(route[48], Hop::Sensor(NodeId(48)));
    }

    #[test]
    fn consecutive_failures_share_one_hop() {
        let down: BTreeSet<_> = [NodeId(47), NodeId(48), NodeId(49)].into();
        let route = build_route(&ids(0..100), &down);
        assert_eq!(route.len(), 98);
        assert_eq!(route[47], Hop::Fallback { skipped: ids(47..50) });
        assert_eq!(route[48], Hop::Sensor(NodeId(50)));
    }

    #[test]
    fn failed_delivery_skips_to_next_reachable() {
        let mut fb = state();
        fb.mark_unreachable(NodeId(2));
        let mut t = tuple(ids(0..4).into_iter().map(Hop::Sensor).collect());
        t.push_fresh(fresh(0, 0));
        assert_eq!(fb.pass_through(&mut t, Arrival::Failed { hop_index: 1 }, Timestamp(50)), NextHop::Sensor(NodeId(3)));
        assert!(fb.is_unreachable(NodeId(1)));
        assert_eq!(t.values.len(), 3);
        assert_eq!(t.cursor, 2);
    }

    #[test]
    fn all_successors_down_returns_to_loop_node() {
        let mut fb = state();
        for i in 2..4 {
            fb.mark_unreachable(NodeId(i));
        }
        let mut t = tuple(ids(0..4).into_iter().map(Hop::Sensor).collect());
        t.push_fresh(fresh(0, 0));
        let next = fb.pass_through(&mut t, Arrival::Failed { hop_index: 1 }, Timestamp(50));
        assert_eq!(next, NextHop::LoopNode);
        assert_eq!(t.values.len(), 4);
        assert!(t.values[1..].iter().all(|v| v.validity == Validity::Null));
        assert!(t.degraded);
    }

    #[test]
    fn collocated_pass_through_closes_segment() {
        let mut fb = state();
        let mut t = tuple(vec![Hop::Sensor(NodeId(0)), Hop::Fallback { skipped: vec![NodeId(1)] }, Hop::Sensor(NodeId(2))]);
        t.push_fresh(fresh(0, 0));
        t.cursor = 1;
        fb.pass_through(&mut t, Arrival::Planned, Timestamp(2_000));
        assert_eq!(t.segments.len(), 1);
        assert_eq!(t.seg_start, Timestamp(2_000));
        assert!(t.extremes.is_none());
        // one sensor left: hop * 2 / 2 + (start - t)
        assert_eq!(t.alpha, Duration(1_000 + 2_000));
    }

    #[test]
    fn cache_then_alternative_then_null() {
        let mut cfg = FallbackConfig::for_period(Duration(1_000));
        cfg.alternatives.insert(NodeId(5), NodeId(6));
        let mut fb = FallbackState::new(cfg);
        let result = ResultTuple {
            seq: 0,
            t: Timestamp(0),
            l_s: Timestamp(100),
            emitted_at: Timestamp(200),
            c_g: Duration(0),
            c_e: Duration(0),
            delta: Duration(0),
            delta_t: Duration(0),
            d_max: Duration(0),
            values: vec![fresh(5, 90), fresh(6, 91)],
            loop_count: 1,
            degraded: false,
            adhoc: false,
            infeasible: false,
        };
        fb.observe_result(&result);
        assert_eq!(fb.compensate_missing(NodeId(5), Timestamp(500), &[]).validity, Validity::Cached);
        // cache of 5 is stale, alternative 6 is in the tuple
        let v = fb.compensate_missing(NodeId(5), Timestamp(5_000), &[fresh(6, 4_900)]);
        assert_eq!((v.validity, v.sample.read_time), (Validity::Substituted, Timestamp(4_900)));
        assert_eq!(fb.compensate_missing(NodeId(5), Timestamp(5_000), &[]).validity, Validity::Null);
        assert_eq!(fb.compensate_missing(NodeId(9), Timestamp(0), &[]).validity, Validity::Null);
    }

    #[test]
    fn overflow_uses_store_and_local_best() {
        let mut fb = state();
        let params = JoinParams {
            t: Timestamp(100),
            t_now: Timestamp(150),
            alpha: Duration(50),
            mu: 0.0,
            bands: None,
        };
        let req = |local: Option<Sample>| OverflowRequest {
            owner: NodeId(3),
            params,
            shift: Duration::ZERO,
            local_best: local,
        };
        assert_eq!(fb.serve_overflow(&req(None)), None);
        fb.store_eviction(NodeId(3), Sample::new(Timestamp(60), 1));
        assert_eq!(fb.serve_overflow(&req(None)), Some(Sample::new(Timestamp(60), 1)));
        fb.store_eviction(NodeId(3), Sample::new(Timestamp(98), 2));
        fb.store_eviction(NodeId(3), Sample::new(Timestamp(80), 3));
        assert_eq!(fb.serve_overflow(&req(None)), Some(Sample::new(Timestamp(98), 2)));
        let local = Sample::new(Timestamp(101), 4);
        assert_eq!(fb.serve_overflow(&req(Some(local))), Some(local));
        let stored: Vec<i64> = fb.evicted(NodeId(3)).map(|s| s.read_time.as_nanos()).collect();
        assert_eq!(stored, vec![60, 80, 98]);
    }
}
