//! The loop node: dispatches request tuples, joins the returned tuples of all
//! loops into result tuples, tunes each loop and plans splits and merges.

pub mod controller;
pub mod stats;
pub mod topology;
pub mod tuning;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::coherence::{interval_hull, Interval, JoinedValue, LoopId, NodeId, Sample, Validity};
use crate::fallback::build_route;
use crate::time::{Duration, Timestamp};
use crate::tuple::{Hop, RequestTuple, ResultTuple};

pub use controller::{ControllerConfig, LoopController, LoopObservation, MuMode, TuningStep};
pub use stats::DeltaStats;
pub use topology::{plan_topology, split_even, LoopSummary, TopologyConfig, TopologyPlan};

#[derive(Clone, Debug, PartialEq)]
pub struct LoopNodeConfig {
    pub request_period: Duration,
    /// `t = l_s + t_offset`.
    pub t_offset: Duration,
    pub controller: ControllerConfig,
    pub topology: TopologyConfig,
    pub adaptive_topology: bool,
    /// Minimum time between two topology changes.
    pub topology_cooldown: Duration,
    /// Observations every loop needs before a topology change is considered.
    pub min_observations: u64,
    /// Lower bound of the round timeout; also used before any roundtrip is known.
    pub round_timeout: Duration,
    /// A collocated fallback splits loops into segments.
    pub collocated_fallback: bool,
    /// Start with this many loops instead of one.
    pub initial_loops: usize,
}

impl LoopNodeConfig {
    pub fn new(request_period: Duration, c_gmax: Duration) -> Self {
        LoopNodeConfig {
            request_period,
            t_offset: Duration::ZERO,
            controller: ControllerConfig {
                c_gmax,
                ..ControllerConfig::default()
            },
            topology: TopologyConfig::default(),
            adaptive_topology: true,
            topology_cooldown: request_period * 20,
            min_observations: 10,
            round_timeout: Duration::from_secs(60),
            collocated_fallback: true,
            initial_loops: 1,
        }
    }
}

#[derive(Clone, Debug)]
struct Round {
    l_s: Timestamp,
    t: Timestamp,
    epoch: u64,
    loops: Vec<Vec<NodeId>>,
    received: Vec<Option<RequestTuple>>,
    adhoc: bool,
    deadline: Timestamp,
}

/// A topology change applied by the loop node.
#[derive(Clone, Debug, PartialEq)]
pub struct TopologyChange {
    pub at: Timestamp,
    pub loops: Vec<Vec<NodeId>>,
    pub infeasible: bool,
}

pub struct LoopNode {
    config: LoopNodeConfig,
    controllers: Vec<LoopController>,
    epoch: u64,
    next_seq: u64,
    rounds: BTreeMap<u64, Round>,
    probe_pending: Option<u64>,
    last_change: Timestamp,
    infeasible: bool,
    changes: Vec<TopologyChange>,
    late: u64,
    skipped_dispatches: u64,
}

impl LoopNode {
    pub fn new(nodes: Vec<NodeId>, config: LoopNodeConfig) -> Self {
        let loops = split_even(&nodes, config.initial_loops.max(1));
        let controllers = loops
            .into_iter()
            .enumerate()
            .map(|(i, n)| LoopController::new(LoopId(i as u32), n, config.controller.clone()))
            .collect();
        LoopNode {
            config,
            controllers,
            epoch: 0,
            next_seq: 0,
            rounds: BTreeMap::new(),
            probe_pending: None,
            last_change: Timestamp::MIN,
            infeasible: false,
            changes: Vec::new(),
            late: 0,
            skipped_dispatches: 0,
        }
    }

    pub fn config(&self) -> &LoopNodeConfig {
        &self.config
    }

    pub fn loop_count(&self) -> usize {
        self.controllers.len()
    }

    pub fn controllers(&self) -> &[LoopController] {
        &self.controllers
    }

    pub fn loops(&self) -> Vec<Vec<NodeId>> {
        self.controllers.iter().map(|c| c.nodes().to_vec()).collect()
    }

    pub fn topology_changes(&self) -> &[TopologyChange] {
        &self.changes
    }

    pub fn in_flight(&self) -> usize {
        self.rounds.len()
    }

    /// Tuples that arrived after their round was closed.
    pub fn late_tuples(&self) -> u64 {
        self.late
    }

    /// Dispatch slots skipped while an initialization probe was outstanding.
    pub fn skipped_dispatches(&self) -> u64 {
        self.skipped_dispatches
    }

    pub fn set_c_gmax(&mut self, c_gmax: Duration) {
        self.config.controller.c_gmax = c_gmax;
        for c in &mut self.controllers {
            c.set_c_gmax(c_gmax);
        }
    }

    fn timeout_for(&self) -> Duration {
        let worst = self
            .controllers
            .iter()
            .filter(|c| !c.stats().is_empty())
            .map(|c| c.stats().mean() + 3.0 * c.stats().std_dev())
            .fold(0.0, f64::max);
        self.config
            .round_timeout
            .max(Duration::from_secs_f64(4.0 * worst / 1e9))
    }

    /// Starts a new round at `now`. Returns one tuple per loop, or nothing
    /// while an initialization probe is still out.
    pub fn dispatch(&mut self, now: Timestamp, unreachable: &BTreeSet<NodeId>) -> Vec<RequestTuple> {
        if self.probe_pending.is_some() {
            self.skipped_dispatches += 1;
            return Vec::new();
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        let t = now + self.config.t_offset;
        let probe = self.controllers.iter().any(|c| !c.is_initialized());
        if probe {
            self.probe_pending = Some(seq);
        }
        let collocated = self.config.collocated_fallback;
        let mut tuples = Vec::with_capacity(self.controllers.len());
        for c in &mut self.controllers {
            let route: Arc<[Hop]> = build_route(c.nodes(), unreachable).into();
            let (alpha, mu) = if probe {
                (Duration::ZERO, c.mu())
            } else {
                c.on_dispatch(now);
                let sensors = if collocated {
                    route.iter().take_while(|h| matches!(h, Hop::Sensor(_))).count()
                } else {
                    route.len()
                };
                (c.alpha_for(sensors, now, t), c.mu())
            };
            let mut tuple = RequestTuple::new(seq, c.id(), t, now, alpha, mu, route, c.hop_estimate());
            tuple.adhoc = probe;
            tuples.push(tuple);
        }
        let deadline = now + self.timeout_for();
        self.rounds.insert(
            seq,
            Round {
                l_s: now,
                t,
                epoch: self.epoch,
                loops: self.loops(),
                received: vec![None; tuples.len()],
                adhoc: probe,
                deadline,
            },
        );
        tuples
    }

    /// Deadline of round `seq`, if it is still open.
    pub fn deadline(&self, seq: u64) -> Option<Timestamp> {
        self.rounds.get(&seq).map(|r| r.deadline)
    }

    /// Accepts a tuple returning at `now`; emits the result once every loop of its round is back.
    pub fn receive(&mut self, mut tuple: RequestTuple, now: Timestamp) -> Option<ResultTuple> {
        let seq = tuple.seq;
        let Some(round) = self.rounds.get_mut(&seq) else {
            log::warn!("discarding late tuple seq={} loop={}", tuple.seq, tuple.origin_loop);
            self.late += 1;
            return None;
        };
        let idx = tuple.origin_loop.0 as usize;
        if idx >= round.received.len() || round.received[idx].is_some() {
            log::warn!("discarding duplicate tuple seq={} loop={}", tuple.seq, tuple.origin_loop);
            self.late += 1;
            return None;
        }
        tuple.close_segment(now);
        round.received[idx] = Some(tuple);
        if round.received.iter().all(Option::is_some) {
            return self.complete(seq, now);
        }
        None
    }

    /// Closes round `seq` if its deadline has passed.
    pub fn on_timeout(&mut self, seq: u64, now: Timestamp) -> Option<ResultTuple> {
        match self.rounds.get(&seq) {
            Some(r) if r.deadline <= now => {
                log::warn!("round {seq} timed out with {} loop(s) missing", r.received.iter().filter(|x| x.is_none()).count());
                self.complete(seq, now)
            }
            _ => None,
        }
    }

    fn complete(&mut self, seq: u64, now: Timestamp) -> Option<ResultTuple> {
        let round = self.rounds.remove(&seq)?;
        if self.probe_pending == Some(seq) {
            self.probe_pending = None;
        }
        let result = joint_result(seq, &round, now, self.infeasible, self.min_d_max());

        if round.epoch == self.epoch {
            for (c, tuple) in self.controllers.iter_mut().zip(&round.received) {
                let Some(tuple) = tuple else { continue };
                let intervals = tuple.segments.clone();
                let c_g = loop_guarantee(&intervals, tuple.longest_segment);
                c.observe(LoopObservation {
                    l_s: round.l_s,
                    delta: now - round.l_s,
                    c_g,
                    hops: tuple.hops_total,
                    adhoc: round.adhoc,
                });
            }
            if !round.adhoc {
                self.maybe_replan(now);
            }
        }
        Some(ResultTuple {
            d_max: self.min_d_max(),
            ..result
        })
    }

    fn min_d_max(&self) -> Duration {
        self.controllers
            .iter()
            .map(LoopController::d_max)
            .min()
            .unwrap_or(self.config.controller.c_gmax)
    }

    fn maybe_replan(&mut self, now: Timestamp) {
        if !self.config.adaptive_topology || self.probe_pending.is_some() {
            return;
        }
        if self.last_change != Timestamp::MIN && now - self.last_change < self.config.topology_cooldown {
            return;
        }
        if self
            .controllers
            .iter()
            .any(|c| c.observations() < self.config.min_observations)
        {
            return;
        }
        let summaries: Vec<LoopSummary> = self
            .controllers
            .iter()
            .map(|c| LoopSummary {
                nodes: c.nodes().to_vec(),
                stats: *c.stats(),
                d_max: c.d_max(),
                c_gmax: c.c_gmax(),
            })
            .collect();
        match plan_topology(&summaries, &self.config.topology) {
            TopologyPlan::Keep => {}
            TopologyPlan::Replace {
                loops,
                priors,
                infeasible,
            } => {
                log::info!(
                    "topology change at {now}: {} -> {} loop(s){}",
                    self.controllers.len(),
                    loops.len(),
                    if infeasible { " (constraints infeasible)" } else { "" }
                );
                self.controllers = loops
                    .iter()
                    .zip(priors)
                    .enumerate()
                    .map(|(i, (nodes, prior))| {
                        LoopController::new(LoopId(i as u32), nodes.clone(), self.config.controller.clone())
                            .with_prior(prior)
                    })
                    .collect();
                self.epoch += 1;
                self.last_change = now;
                self.infeasible = infeasible;
                self.changes.push(TopologyChange { at: now, loops, infeasible });
            }
        }
    }
}

/// Guarantee of one loop's segments; never below its longest segment.
fn loop_guarantee(intervals: &[Interval], longest: Duration) -> Duration {
    interval_hull(intervals)
        .map(|h| h.diameter())
        .unwrap_or(Duration::ZERO)
        .max(longest)
}

fn null_slot(id: NodeId, t: Timestamp) -> JoinedValue {
    JoinedValue {
        node: id,
        sample: Sample::null(),
        age: Duration::ZERO,
        reported_time: t,
        validity: Validity::Null,
    }
}

/// Joins the returned tuples of one round. Loops that did not return get null slots.
fn joint_result(seq: u64, round: &Round, now: Timestamp, infeasible: bool, d_max: Duration) -> ResultTuple {
    let mut values = Vec::new();
    let mut intervals = Vec::new();
    let mut longest = Duration::ZERO;
    let mut degraded = false;
    for (nodes, tuple) in round.loops.iter().zip(&round.received) {
        match tuple {
            Some(tp) => {
                values.extend_from_slice(&tp.values);
                intervals.extend_from_slice(&tp.segments);
                longest = longest.max(tp.longest_segment);
                degraded |= tp.degraded;
            }
            None => {
                values.extend(nodes.iter().map(|&id| null_slot(id, round.t)));
                degraded = true;
            }
        }
    }
    let fresh: Vec<Timestamp> = values.iter().filter(|v| v.is_fresh()).map(|v| v.reported_time).collect();
    let c_e = match (fresh.iter().min(), fresh.iter().max()) {
        (Some(lo), Some(hi)) => *hi - *lo,
        _ => Duration::ZERO,
    };
    let delta_t = fresh.iter().map(|&ti| (round.t - ti).abs()).max().unwrap_or(Duration::ZERO);
    ResultTuple {
        seq,
        t: round.t,
        l_s: round.l_s,
        emitted_at: now,
        c_g: loop_guarantee(&intervals, longest),
        c_e,
        delta: longest,
        delta_t,
        d_max,
        values,
        loop_count: round.loops.len(),
        degraded,
        adhoc: round.adhoc,
        infeasible,
    }
}
