//! Central join for comparison: every sensor pushes a timestamped reading
//! once per request period and a central matcher assembles tuples by nearest
//! timestamp. Such tuples carry no guarantee, only an estimate.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::clock::ClockInstance;
use crate::netsim::engine::clock_seed;
use crate::netsim::{EventQueue, SimConfig};
use crate::time::{Duration, Timestamp};

/// One assembled slot.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineRow {
    pub slot: u64,
    pub t_ns: i64,
    pub ce_ns: i64,
    pub latency_ns: i64,
    pub matched: usize,
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineOutput {
    pub rows: Vec<BaselineRow>,
    /// Data messages received by the central node.
    pub inbound_messages: u64,
    /// Transmissions including retries after drops.
    pub transmissions: u64,
    pub slots: u64,
}

enum Event {
    Push { node: usize, k: u64 },
    Arrive { node: usize, reported: Timestamp },
}

/// Runs the central join on the network and clocks of `cfg` for
/// `floor(duration / request_period)` request slots.
pub fn run_baseline(cfg: &SimConfig) -> BaselineOutput {
    let period = cfg.loop_node.request_period;
    let slots = (cfg.duration.as_nanos() / period.as_nanos()).max(0) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut clocks: Vec<ClockInstance> = (0..cfg.node_count)
        .map(|i| {
            let offset = cfg.offsets.get(i).copied().unwrap_or(Duration::ZERO);
            ClockInstance::new(cfg.clock.clone(), offset, cfg.tick_mode, clock_seed(cfg.seed, i))
        })
        .collect();
    let mut queue = EventQueue::new();
    // sensor i pushes its k-th reading when its own clock reads k * period
    let slot_time = |k: u64| Timestamp(period.as_nanos() * k as i64);
    if slots > 0 {
        for (i, c) in clocks.iter_mut().enumerate() {
            c.advance_to(Timestamp::ZERO);
            queue.schedule(c.global_for_local(slot_time(1)), Event::Push { node: i, k: 1 });
        }
    }

    let mut arrivals: BTreeMap<u64, Vec<(usize, Timestamp, Timestamp)>> = BTreeMap::new();
    let mut inbound = 0u64;
    let mut transmissions = 0u64;
    while let Some((now, ev)) = queue.pop() {
        match ev {
            Event::Push { node, k } => {
                let reported = clocks[node].advance_to(now);
                let mut delay = Duration::ZERO;
                loop {
                    transmissions += 1;
                    match cfg.link.transmit(&mut rng) {
                        Some(lat) => {
                            delay += lat;
                            break;
                        }
                        None => delay += cfg.link.ack_timeout,
                    }
                }
                queue.schedule(now + delay, Event::Arrive { node, reported });
                if k < slots {
                    let at = clocks[node].global_for_local(slot_time(k + 1));
                    queue.schedule(at, Event::Push { node, k: k + 1 });
                }
            }
            Event::Arrive { node, reported } => {
                inbound += 1;
                // nearest slot by reported time; slots are at k * period on the trusted clock
                let k = ((reported.as_nanos() as f64) / period.as_nanos_f64()).round();
                if k >= 1.0 && (k as u64) <= slots {
                    arrivals.entry(k as u64).or_default().push((node, reported, now));
                }
            }
        }
    }

    let rows = (1..=slots)
        .map(|k| {
            let t = slot_time(k);
            let got = arrivals.get(&k).map(Vec::as_slice).unwrap_or(&[]);
            let mut nodes: Vec<usize> = got.iter().map(|g| g.0).collect();
            nodes.sort_unstable();
            nodes.dedup();
            let lo = got.iter().map(|g| g.1).min();
            let hi = got.iter().map(|g| g.1).max();
            let last = got.iter().map(|g| g.2).max();
            BaselineRow {
                slot: k,
                t_ns: t.as_nanos(),
                ce_ns: match (lo, hi) {
                    (Some(lo), Some(hi)) => (hi - lo).as_nanos(),
                    _ => 0,
                },
                latency_ns: last.map_or(0, |l| (l - t).as_nanos()),
                matched: got.len(),
                complete: nodes.len() == cfg.node_count && got.len() == cfg.node_count,
            }
        })
        .collect();
    BaselineOutput {
        rows,
        inbound_messages: inbound,
        transmissions,
        slots,
    }
}
