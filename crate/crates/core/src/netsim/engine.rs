//! The simulated world: one loop node with a trusted clock, a fallback node,
//! and sensors with drifting clocks connected by lossy links.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::clock::{ClockInstance, ClockSpec, TickMode};
use crate::coherence::{NodeId, Sample};
use crate::fallback::{Arrival, FallbackConfig, FallbackState};
use crate::loop_node::{LoopNode, LoopNodeConfig, TopologyChange};
use crate::netsim::event::EventQueue;
use crate::netsim::link::LinkModel;
use crate::netsim::GroundTruth;
use crate::sensor_node::{Eviction, JoinOutcome, SensorConfig, SensorNode, SensorReader};
use crate::time::{Duration, Timestamp};
use crate::tuple::{Hop, RequestTuple, ResultTuple};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureKind {
    Crash,
    Recover,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FailureSpec {
    pub at: Timestamp,
    pub nodes: Vec<NodeId>,
    pub kind: FailureKind,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub node_count: usize,
    pub link: LinkModel,
    pub clock: ClockSpec,
    pub tick_mode: TickMode,
    /// Initial clock offset per node; missing entries are zero.
    pub offsets: Vec<Duration>,
    pub sensor: SensorConfig,
    pub loop_node: LoopNodeConfig,
    pub fallback: FallbackConfig,
    pub duration: Duration,
    /// `(time, C_gmax)` changes, sorted by time.
    pub c_gmax_schedule: Vec<(Timestamp, Duration)>,
    pub failures: Vec<FailureSpec>,
    /// Added to every delivery at a sensor.
    pub processing_time: Duration,
    pub slow_nodes: BTreeMap<NodeId, Duration>,
    pub trace: bool,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(
        node_count: usize,
        link: LinkModel,
        clock: ClockSpec,
        sensor: SensorConfig,
        loop_node: LoopNodeConfig,
        duration: Duration,
        seed: u64,
    ) -> Self {
        let mut fallback = FallbackConfig::for_period(loop_node.request_period);
        fallback.collocated = loop_node.collocated_fallback;
        SimConfig {
            node_count,
            link,
            clock,
            tick_mode: TickMode::Stochastic,
            offsets: Vec::new(),
            sensor,
            loop_node,
            fallback,
            duration,
            c_gmax_schedule: Vec::new(),
            failures: Vec::new(),
            processing_time: Duration::ZERO,
            slow_nodes: BTreeMap::new(),
            trace: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.node_count == 0 {
            return bad("node_count must be positive".into());
        }
        if self.duration <= Duration::ZERO {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if self.loop_node.request_period <= Duration::ZERO {
            return bad("request_period must be positive".into());
        }
        self.link.validate().or_else(|e| bad(e.to_string()))?;
        self.sensor.scheduler.validate().or_else(bad)?;
        if self.offsets.len() > self.node_count {
            return bad(format!("{} offsets given for {} nodes", self.offsets.len(), self.node_count));
        }
        if self.c_gmax_schedule.windows(2).any(|w| w[0].0 > w[1].0) {
            return bad("c_gmax schedule is not sorted by time".into());
        }
        if self.failures.windows(2).any(|w| w[0].at > w[1].at) {
            return bad("failure schedule is not sorted by time".into());
        }
        let n = self.node_count as u32;
        let out_of_range = self
            .failures
            .iter()
            .flat_map(|f| f.nodes.iter())
            .chain(self.fallback.alternatives.keys())
            .chain(self.fallback.alternatives.values())
            .chain(self.slow_nodes.keys())
            .find(|id| id.0 >= n);
        if let Some(id) = out_of_range {
            return bad(format!("node {id} does not exist (node_count = {n})"));
        }
        Ok(())
    }
}

/// A result tuple with its ground-truth coherence.
#[derive(Clone, Debug, PartialEq)]
pub struct Emitted {
    pub result: ResultTuple,
    /// True span of the fresh values' read times; `None` without fresh values.
    pub c_real: Option<Duration>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MessageStats {
    pub sent: u64,
    pub dropped: u64,
    /// Sends that were not acknowledged (drops and crashed receivers).
    pub failed: u64,
    pub loop_node_inbound: u64,
    pub fallback_inbound: u64,
    /// Tuples lost with a crashed sender.
    pub lost_tuples: u64,
}

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub emitted: Vec<Emitted>,
    /// Sensor reads per node.
    pub reads: Vec<u64>,
    pub messages: MessageStats,
    pub topology_changes: Vec<TopologyChange>,
    pub final_loop_count: usize,
    pub fallback_passes: u64,
    pub late_tuples: u64,
    /// Tab-separated event lines when tracing is enabled.
    pub trace: Vec<String>,
    pub truth: GroundTruth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Place {
    Sensor(NodeId),
    LoopNode,
    Fallback,
}

impl Place {
    fn label(self) -> String {
        match self {
            Place::Sensor(id) => id.to_string(),
            Place::LoopNode => "loop".into(),
            Place::Fallback => "fallback".into(),
        }
    }
}

#[derive(Clone, Debug)]
enum Payload {
    Tuple(Box<RequestTuple>, Arrival),
    Eviction { owner: NodeId, sample: Sample },
    Probe,
}

impl Payload {
    fn kind(&self) -> &'static str {
        match self {
            Payload::Tuple(..) => "tuple",
            Payload::Eviction { .. } => "eviction",
            Payload::Probe => "probe",
        }
    }
}

#[derive(Clone, Debug)]
enum Event {
    Dispatch,
    RoundTimeout(u64),
    Deliver {
        from: Place,
        to: Place,
        payload: Payload,
        sent_at: Timestamp,
        network: bool,
    },
    Failed {
        from: Place,
        to: Place,
        payload: Payload,
    },
    Timer {
        node: NodeId,
        epoch: u64,
        due: Timestamp,
    },
    PlannedRead {
        node: NodeId,
        epoch: u64,
    },
    Failure(FailureKind, Vec<NodeId>),
    SetCgmax(Duration),
    Recheck(NodeId),
}

struct Reader<'a> {
    truth: &'a mut GroundTruth,
    node: NodeId,
    at: Timestamp,
    local: Timestamp,
}

impl SensorReader for Reader<'_> {
    fn read_now(&mut self) -> Sample {
        Sample::new(self.local, self.truth.record(self.node, self.at))
    }
}

pub struct Simulation {
    cfg: SimConfig,
    end: Timestamp,
    queue: EventQueue<Event>,
    rng: ChaCha8Rng,
    sensors: Vec<SensorNode>,
    clocks: Vec<ClockInstance>,
    alive: Vec<bool>,
    epochs: Vec<u64>,
    loop_node: LoopNode,
    fallback: FallbackState,
    recheck_pending: BTreeSet<NodeId>,
    truth: GroundTruth,
    emitted: Vec<Emitted>,
    messages: MessageStats,
    trace: Vec<String>,
}

pub(crate) fn clock_seed(seed: u64, node: usize) -> u64 {
    seed ^ (node as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let n = cfg.node_count;
        let ids: Vec<NodeId> = (0..n as u32).map(NodeId).collect();
        let clocks = (0..n)
            .map(|i| {
                let offset = cfg.offsets.get(i).copied().unwrap_or(Duration::ZERO);
                ClockInstance::new(cfg.clock.clone(), offset, cfg.tick_mode, clock_seed(cfg.seed, i))
            })
            .collect();
        let sensors = ids.iter().map(|&id| SensorNode::new(id, cfg.sensor.clone())).collect();
        let loop_node = LoopNode::new(ids, cfg.loop_node.clone());
        let fallback = FallbackState::new(cfg.fallback.clone());
        Ok(Simulation {
            end: Timestamp(cfg.duration.as_nanos()),
            queue: EventQueue::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            sensors,
            clocks,
            alive: vec![true; n],
            epochs: vec![0; n],
            loop_node,
            fallback,
            recheck_pending: BTreeSet::new(),
            truth: GroundTruth::default(),
            emitted: Vec::new(),
            messages: MessageStats::default(),
            trace: Vec::new(),
            cfg,
        })
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn loop_node(&self) -> &LoopNode {
        &self.loop_node
    }

    fn log(&mut self, kind: &str, node: &str, detail: impl FnOnce() -> String) {
        if self.cfg.trace {
            let line = format!("{}\t{}\t{}\t{}", self.queue.now().as_nanos(), kind, node, detail());
            self.trace.push(line);
        }
    }

    fn bootstrap(&mut self) {
        for i in 0..self.cfg.node_count {
            self.start_timers(NodeId(i as u32));
        }
        self.queue.schedule(Timestamp(0) + self.cfg.loop_node.request_period, Event::Dispatch);
        for (at, v) in self.cfg.c_gmax_schedule.clone() {
            self.queue.schedule(at, Event::SetCgmax(v));
        }
        for f in self.cfg.failures.clone() {
            self.queue.schedule(f.at, Event::Failure(f.kind, f.nodes));
        }
    }

    fn start_timers(&mut self, id: NodeId) {
        let i = id.0 as usize;
        let now = self.queue.now();
        let local = self.clocks[i].advance_to(now);
        if let Some(due) = self.sensors[i].first_timer(local) {
            let at = self.clocks[i].global_for_local(due);
            let epoch = self.epochs[i];
            self.queue.schedule(at, Event::Timer { node: id, epoch, due });
        }
    }

    /// Runs until the configured duration and returns the collected output.
    pub fn run(mut self) -> SimOutput {
        self.bootstrap();
        while let Some(at) = self.queue.peek_time() {
            if at > self.end {
                break;
            }
            let (_, ev) = self.queue.pop().expect("peeked event");
            self.handle(ev);
        }
        SimOutput {
            reads: self.sensors.iter().map(SensorNode::reads).collect(),
            messages: self.messages,
            topology_changes: self.loop_node.topology_changes().to_vec(),
            final_loop_count: self.loop_node.loop_count(),
            fallback_passes: self.fallback.passes(),
            late_tuples: self.loop_node.late_tuples(),
            emitted: self.emitted,
            trace: self.trace,
            truth: self.truth,
        }
    }

    fn handle(&mut self, ev: Event) {
        let now = self.queue.now();
        match ev {
            Event::Dispatch => {
                let tuples = self.loop_node.dispatch(now, self.fallback.unreachable());
                if let Some(first) = tuples.first() {
                    let seq = first.seq;
                    let n = tuples.len();
                    self.log("dispatch", "loop", || format!("seq={seq} loops={n}"));
                    if let Some(deadline) = self.loop_node.deadline(seq) {
                        self.queue.schedule(deadline, Event::RoundTimeout(seq));
                    }
                }
                for t in tuples {
                    self.forward(Place::LoopNode, t, 0);
                }
                let next = now + self.cfg.loop_node.request_period;
                if next <= self.end {
                    self.queue.schedule(next, Event::Dispatch);
                }
            }
            Event::RoundTimeout(seq) => {
                if let Some(r) = self.loop_node.on_timeout(seq, now) {
                    self.log("timeout", "loop", || format!("seq={seq}"));
                    self.emit(r);
                }
            }
            Event::Deliver {
                from,
                to,
                payload,
                sent_at,
                network,
            } => self.deliver(from, to, payload, sent_at, network),
            Event::Failed { from, to, payload } => self.on_failed(from, to, payload),
            Event::Timer { node, epoch, due } => {
                let i = node.0 as usize;
                if !self.alive[i] || self.epochs[i] != epoch {
                    return;
                }
                let local = self.clocks[i].advance_to(now);
                let (read, next) = self.sensors[i].on_timer(due, local);
                if read {
                    self.read(node);
                }
                if let Some(due) = next {
                    let at = self.clocks[i].global_for_local(due);
                    self.queue.schedule(at, Event::Timer { node, epoch, due });
                }
            }
            Event::PlannedRead { node, epoch } => {
                let i = node.0 as usize;
                if self.alive[i] && self.epochs[i] == epoch {
                    self.read(node);
                }
            }
            Event::Failure(kind, nodes) => {
                for id in nodes {
                    self.apply_failure(kind, id);
                }
            }
            Event::SetCgmax(v) => {
                self.log("cgmax", "loop", || v.to_string());
                self.loop_node.set_c_gmax(v);
            }
            Event::Recheck(id) => {
                self.log("recheck", &id.to_string(), String::new);
                self.send(Place::Fallback, Place::Sensor(id), Payload::Probe);
            }
        }
    }

    fn apply_failure(&mut self, kind: FailureKind, id: NodeId) {
        let i = id.0 as usize;
        match kind {
            FailureKind::Crash if self.alive[i] => {
                self.log("crash", &id.to_string(), String::new);
                self.alive[i] = false;
                self.epochs[i] += 1;
                self.sensors[i].reset();
            }
            FailureKind::Recover if !self.alive[i] => {
                self.log("recover", &id.to_string(), String::new);
                self.alive[i] = true;
                self.read(id);
                self.start_timers(id);
            }
            _ => {}
        }
    }

    fn read(&mut self, id: NodeId) {
        let i = id.0 as usize;
        let now = self.queue.now();
        let local = self.clocks[i].advance_to(now);
        let payload = self.truth.record(id, now);
        self.log("read", &id.to_string(), || format!("local={} payload={payload}", local.as_nanos()));
        let eviction = self.sensors[i].record_reading(Sample::new(local, payload), true);
        if let Eviction::ToFallback(sample) = eviction {
            self.send(Place::Sensor(id), Place::Fallback, Payload::Eviction { owner: id, sample });
        }
    }

    fn colocated(&self, a: Place, b: Place) -> bool {
        self.cfg.fallback.collocated
            && matches!((a, b), (Place::LoopNode, Place::Fallback) | (Place::Fallback, Place::LoopNode))
    }

    fn send(&mut self, from: Place, to: Place, payload: Payload) {
        let now = self.queue.now();
        if from == to || self.colocated(from, to) {
            self.queue.schedule(
                now,
                Event::Deliver {
                    from,
                    to,
                    payload,
                    sent_at: now,
                    network: false,
                },
            );
            return;
        }
        self.messages.sent += 1;
        match self.cfg.link.transmit(&mut self.rng) {
            Some(latency) => {
                let extra = match to {
                    Place::Sensor(id) => self
                        .cfg
                        .slow_nodes
                        .get(&id)
                        .copied()
                        .unwrap_or(self.cfg.processing_time),
                    _ => Duration::ZERO,
                };
                self.queue.schedule(
                    now + latency + extra,
                    Event::Deliver {
                        from,
                        to,
                        payload,
                        sent_at: now,
                        network: true,
                    },
                );
            }
            None => {
                self.messages.dropped += 1;
                self.log("drop", &to.label(), || payload.kind().to_string());
                self.queue
                    .schedule(now + self.cfg.link.ack_timeout, Event::Failed { from, to, payload });
            }
        }
    }

    /// Sends `tuple` from `from` to the stop at route index `index`.
    fn forward(&mut self, from: Place, mut tuple: RequestTuple, index: usize) {
        let route = tuple.route.clone();
        tuple.cursor = index;
        let to = match route.get(index) {
            None => Place::LoopNode,
            Some(Hop::Sensor(id)) => Place::Sensor(*id),
            Some(Hop::Fallback { .. }) => Place::Fallback,
        };
        self.send(from, to, Payload::Tuple(Box::new(tuple), Arrival::Planned));
    }

    fn deliver(&mut self, from: Place, to: Place, payload: Payload, sent_at: Timestamp, network: bool) {
        if let Place::Sensor(id) = to {
            if !self.alive[id.0 as usize] {
                self.log("unacked", &to.label(), || payload.kind().to_string());
                self.queue
                    .schedule(sent_at + self.cfg.link.ack_timeout, Event::Failed { from, to, payload });
                return;
            }
        }
        let now = self.queue.now();
        match (to, payload) {
            (Place::Sensor(id), Payload::Tuple(mut tuple, _)) => {
                if network {
                    tuple.hops_in_segment += 1;
                    tuple.hops_total += 1;
                }
                self.log("join", &id.to_string(), || format!("seq={}", tuple.seq));
                self.join_at_sensor(id, *tuple);
            }
            (Place::Sensor(id), Payload::Probe) => {
                if self.fallback.mark_reachable(id) {
                    self.log("reintegrate", &id.to_string(), String::new);
                }
                self.recheck_pending.remove(&id);
            }
            (Place::Fallback, Payload::Tuple(mut tuple, arrival)) => {
                if network {
                    tuple.hops_in_segment += 1;
                    tuple.hops_total += 1;
                    self.messages.fallback_inbound += 1;
                }
                self.at_fallback(*tuple, arrival);
            }
            (Place::Fallback, Payload::Eviction { owner, sample }) => {
                self.messages.fallback_inbound += 1;
                self.fallback.store_eviction(owner, sample);
            }
            (Place::LoopNode, Payload::Tuple(mut tuple, _)) => {
                if network {
                    tuple.hops_total += 1;
                    self.messages.loop_node_inbound += 1;
                }
                let seq = tuple.seq;
                self.log("return", "loop", || format!("seq={seq} loop={}", tuple.origin_loop));
                if let Some(r) = self.loop_node.receive(*tuple, now) {
                    self.emit(r);
                }
            }
            (to, p) => log::warn!("unexpected {} message at {}", p.kind(), to.label()),
        }
    }

    fn join_at_sensor(&mut self, id: NodeId, mut tuple: RequestTuple) {
        let i = id.0 as usize;
        let now = self.queue.now();
        let local = self.clocks[i].advance_to(now);
        let mut reader = Reader {
            truth: &mut self.truth,
            node: id,
            at: now,
            local,
        };
        let report = self.sensors[i].process_request(&mut tuple, local, &mut reader);
        for sample in report.evictions {
            self.send(Place::Sensor(id), Place::Fallback, Payload::Eviction { owner: id, sample });
        }
        let epoch = self.epochs[i];
        for due in report.planned_reads {
            let at = self.clocks[i].global_for_local(due);
            self.queue.schedule(at, Event::PlannedRead { node: id, epoch });
        }
        match report.outcome {
            JoinOutcome::Joined => {
                if let Some(v) = tuple.values.last() {
                    let (age, dt) = (v.age.as_nanos(), (v.reported_time - tuple.t).as_nanos());
                    let (alpha, mu) = (tuple.alpha.as_nanos(), tuple.mu);
                    self.log("value", &id.to_string(), || {
                        format!("seq={} age={age} dt={dt} alpha={alpha} mu={mu:e}", tuple.seq)
                    });
                }
                let next = tuple.cursor + 1;
                self.forward(Place::Sensor(id), tuple, next);
            }
            JoinOutcome::Overflow(req) => {
                self.log("overflow", &id.to_string(), || format!("seq={}", tuple.seq));
                self.send(
                    Place::Sensor(id),
                    Place::Fallback,
                    Payload::Tuple(Box::new(tuple), Arrival::Overflow(req)),
                );
            }
        }
    }

    fn at_fallback(&mut self, mut tuple: RequestTuple, arrival: Arrival) {
        let now = self.queue.now();
        self.fallback.pass_through(&mut tuple, arrival, now);
        let newly: Vec<NodeId> = self
            .fallback
            .unreachable()
            .difference(&self.recheck_pending)
            .copied()
            .collect();
        for id in newly {
            self.log("unreachable", &id.to_string(), String::new);
            self.recheck_pending.insert(id);
            self.queue
                .schedule(now + self.cfg.fallback.recheck_period, Event::Recheck(id));
        }
        let next = tuple.cursor + 1;
        self.forward(Place::Fallback, tuple, next);
    }

    fn on_failed(&mut self, from: Place, to: Place, payload: Payload) {
        self.messages.failed += 1;
        let now = self.queue.now();
        if let Place::Sensor(s) = from {
            if !self.alive[s.0 as usize] {
                if let Payload::Tuple(t, _) = &payload {
                    log::warn!("tuple seq={} lost with crashed sender {s}", t.seq);
                    self.messages.lost_tuples += 1;
                }
                return;
            }
        }
        match (to, payload) {
            (Place::Sensor(_), Payload::Tuple(tuple, _)) => {
                let arrival = Arrival::Failed {
                    hop_index: tuple.cursor,
                };
                if from == Place::Fallback {
                    self.at_fallback(*tuple, arrival);
                } else {
                    self.send(from, Place::Fallback, Payload::Tuple(tuple, arrival));
                }
            }
            (Place::Sensor(id), Payload::Probe) => {
                self.queue
                    .schedule(now + self.cfg.fallback.recheck_period, Event::Recheck(id));
            }
            // the loop node and the fallback never crash: retry
            (to, payload) => self.send(from, to, payload),
        }
    }

    fn emit(&mut self, result: ResultTuple) {
        self.fallback.observe_result(&result);
        let c_real = self.truth.coherence(&result);
        self.log("emit", "loop", || {
            format!(
                "seq={} cg={} ce={} delta={} loops={}",
                result.seq,
                result.c_g.as_nanos(),
                result.c_e.as_nanos(),
                result.delta.as_nanos(),
                result.loop_count
            )
        });
        self.emitted.push(Emitted { result, c_real });
    }
}

/// Validates and runs a simulation.
pub fn run(cfg: SimConfig) -> Result<SimOutput, SimError> {
    Ok(Simulation::new(cfg)?.run())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor_node::{JoinReference, SchedulerKind};

    fn sensor(scheduler: SchedulerKind, period: Duration) -> SensorConfig {
        SensorConfig {
            scheduler,
            buffer_capacity: 256,
            expiry_horizon: period * 4,
            reference: JoinReference::Clock,
            banded: false,
            adhoc_capable: true,
            request_period: period,
        }
    }

    fn small(seed: u64) -> SimConfig {
        let period = Duration::from_millis(200);
        let loop_cfg = LoopNodeConfig::new(period, Duration::from_millis(100));
        SimConfig::new(
            10,
            LinkModel::preset("lan").unwrap(),
            ClockSpec::preset("raspi-sys").unwrap(),
            sensor(SchedulerKind::Periodic { period: Duration::from_millis(5) }, period),
            loop_cfg,
            Duration::from_secs(10),
            seed,
        )
    }

    #[test]
    fn same_seed_same_output() {
        let a = run(small(7)).unwrap();
        let b = run(small(7)).unwrap();
        assert_eq!(a.emitted, b.emitted);
        assert_eq!(a.reads, b.reads);
        assert!(a.emitted.len() > 40);
    }

    #[test]
    fn ideal_clocks_without_jitter_make_estimate_exact() {
        let mut cfg = small(1);
        cfg.clock = ClockSpec::preset("ideal").unwrap();
        cfg.tick_mode = TickMode::Deterministic;
        cfg.link = LinkModel::constant(Duration::from_millis(1));
        let out = run(cfg).unwrap();
        for e in &out.emitted {
            assert_eq!(Some(e.result.c_e), e.c_real, "seq {}", e.result.seq);
        }
    }

    #[test]
    fn crashed_node_is_bypassed_and_reintegrated() {
        let mut cfg = small(3);
        cfg.failures = vec![
            FailureSpec {
                at: Timestamp::from_millis(3_000),
                nodes: vec![NodeId(4)],
                kind: FailureKind::Crash,
            },
            FailureSpec {
                at: Timestamp::from_millis(5_000),
                nodes: vec![NodeId(4)],
                kind: FailureKind::Recover,
            },
        ];
        let out = run(cfg).unwrap();
        assert!(out.fallback_passes > 0);
        let last = &out.emitted.last().unwrap().result;
        assert!(last.values.iter().all(|v| v.is_fresh()));
        assert!(out.emitted.iter().all(|e| e.result.values.len() == 10));
    }

    #[test]
    fn rejects_unknown_node_in_failures() {
        let mut cfg = small(0);
        cfg.failures = vec![FailureSpec {
            at: Timestamp(0),
            nodes: vec![NodeId(99)],
            kind: FailureKind::Crash,
        }];
        assert!(matches!(run(cfg), Err(SimError::Config(_))));
    }
}
