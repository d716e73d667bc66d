//! Split and merge planning for sensing loops.

use crate::coherence::NodeId;
use crate::loop_node::stats::DeltaStats;
use crate::time::Duration;

#[derive(Clone, Debug, PartialEq)]
pub struct TopologyConfig {
    pub max_loops: usize,
    /// Merge only when the merged loop fits in this fraction of the limit.
    pub hysteresis: f64,
    pub latency_limit: Option<Duration>,
    /// Weight given to the seeded statistics of a new loop.
    pub prior_weight: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            max_loops: 8,
            hysteresis: 0.9,
            latency_limit: None,
            prior_weight: 10.0,
        }
    }
}

/// Current state of one loop as seen by the planner.
#[derive(Clone, Debug, PartialEq)]
pub struct LoopSummary {
    pub nodes: Vec<NodeId>,
    pub stats: DeltaStats,
    pub d_max: Duration,
    pub c_gmax: Duration,
}

impl LoopSummary {
    fn hop(&self) -> f64 {
        self.stats.mean() / (self.nodes.len() as f64 + 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TopologyPlan {
    Keep,
    Replace {
        loops: Vec<Vec<NodeId>>,
        priors: Vec<DeltaStats>,
        /// The limits cannot be met within `max_loops`.
        infeasible: bool,
    },
}

/// Splits `nodes` into `k` contiguous parts whose sizes differ by at most one.
pub fn split_even(nodes: &[NodeId], k: usize) -> Vec<Vec<NodeId>> {
    let k = k.clamp(1, nodes.len().max(1));
    let base = nodes.len() / k;
    let extra = nodes.len() % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        out.push(nodes[start..start + len].to_vec());
        start += len;
    }
    out
}

fn limit(d_max: Duration, cfg: &TopologyConfig) -> f64 {
    let l = d_max.as_nanos_f64();
    cfg.latency_limit.map_or(l, |ll| l.min(ll.as_nanos_f64()))
}

/// Expected roundtrip mean and variance of a sub-loop of `n` nodes.
fn sub_loop(hop: f64, var: f64, total_nodes: usize, n: usize) -> (f64, f64) {
    let frac = (n as f64 + 1.0) / (total_nodes as f64 + 1.0);
    (hop * (n as f64 + 1.0), var * frac)
}

fn split_prior(s: &LoopSummary, n: usize, weight: f64) -> DeltaStats {
    let (mean, var) = sub_loop(s.hop(), s.stats.variance(), s.nodes.len(), n);
    DeltaStats::seeded(mean, var, s.stats.weight().min(weight))
}

/// Smallest `k` for which every part meets its limit, capped at `max_k`.
fn choose_k(s: &LoopSummary, cfg: &TopologyConfig, max_k: usize) -> (usize, bool) {
    let n = s.nodes.len();
    for k in 2..=max_k.min(n) {
        let largest = n.div_ceil(k);
        let (mean, var) = sub_loop(s.hop(), s.stats.variance(), n, largest);
        let sd3 = 3.0 * var.sqrt();
        let d_max_k = s.c_gmax.as_nanos_f64() - sd3;
        let lim = cfg.latency_limit.map_or(d_max_k, |ll| d_max_k.min(ll.as_nanos_f64()));
        if mean + sd3 <= lim {
            return (k, false);
        }
    }
    (max_k.min(n).max(1), true)
}

/// Decides whether to split overloaded loops or merge the two fastest loops.
pub fn plan_topology(loops: &[LoopSummary], cfg: &TopologyConfig) -> TopologyPlan {
    if loops.is_empty() {
        return TopologyPlan::Keep;
    }
    let over: Vec<bool> = loops
        .iter()
        .map(|s| s.nodes.len() > 1 && s.stats.mean() > limit(s.d_max, cfg))
        .collect();

    if over.iter().any(|&o| o) {
        let mut budget = cfg.max_loops.saturating_sub(loops.len());
        let mut infeasible = false;
        let mut out = Vec::new();
        let mut priors = Vec::new();
        for (s, &is_over) in loops.iter().zip(&over) {
            if is_over && budget > 0 {
                let (k, inf) = choose_k(s, cfg, budget + 1);
                infeasible |= inf;
                budget -= k - 1;
                for part in split_even(&s.nodes, k) {
                    priors.push(split_prior(s, part.len(), cfg.prior_weight));
                    out.push(part);
                }
            } else {
                infeasible |= is_over;
                priors.push(s.stats);
                out.push(s.nodes.clone());
            }
        }
        if out.len() == loops.len() {
            return TopologyPlan::Keep;
        }
        return TopologyPlan::Replace {
            loops: out,
            priors,
            infeasible,
        };
    }

    if loops.len() < 2 {
        return TopologyPlan::Keep;
    }
    let mut order: Vec<usize> = (0..loops.len()).collect();
    order.sort_by(|&a, &b| {
        loops[a]
            .stats
            .mean()
            .partial_cmp(&loops[b].stats.mean())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let (a, b) = (order[0].min(order[1]), order[0].max(order[1]));
    let (la, lb) = (&loops[a], &loops[b]);
    let n = la.nodes.len() + lb.nodes.len();
    let hop = (la.stats.mean() + lb.stats.mean()) / (n as f64 + 2.0);
    let mean = hop * (n as f64 + 1.0);
    let var = la.stats.variance() + lb.stats.variance();
    let lim = limit(la.d_max.min(lb.d_max), cfg);
    if mean + 3.0 * var.sqrt() > cfg.hysteresis * lim {
        return TopologyPlan::Keep;
    }
    let weight = la.stats.weight().min(lb.stats.weight()).min(cfg.prior_weight);
    let mut out = Vec::new();
    let mut priors = Vec::new();
    for (i, s) in loops.iter().enumerate() {
        if i == a {
            let mut merged = la.nodes.clone();
            merged.extend_from_slice(&lb.nodes);
            out.push(merged);
            priors.push(DeltaStats::seeded(mean, var, weight));
        } else if i != b {
            out.push(s.nodes.clone());
            priors.push(s.stats);
        }
    }
    TopologyPlan::Replace {
        loops: out,
        priors,
        infeasible: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: u32) -> Vec<NodeId> {
        (0..n).map(NodeId).collect()
    }

    fn summary(nodes: Vec<NodeId>, mean_s: f64, sd_s: f64, c_gmax_s: f64) -> LoopSummary {
        let stats = DeltaStats::seeded(mean_s * 1e9, (sd_s * 1e9).powi(2), 100.0);
        let c_gmax = Duration::from_secs_f64(c_gmax_s);
        LoopSummary {
            nodes,
            d_max: c_gmax - Duration::from_secs_f64(3.0 * sd_s),
            stats,
            c_gmax,
        }
    }

    #[test]
    fn even_split_keeps_order() {
        let parts = split_even(&ids(7), 3);
        assert_eq!(parts.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 2, 2]);
        assert_eq!(parts.concat(), ids(7));
    }

    #[test]
    fn far_limit_keeps_single_loop() {
        let s = summary(ids(200), 7.6, 0.14, 60.0);
        assert_eq!(plan_topology(&[s], &TopologyConfig::default()), TopologyPlan::Keep);
    }

    #[test]
    fn limit_just_below_roundtrip_splits_in_two() {
        let s = summary(ids(200), 7.64, 0.14, 7.6);
        match plan_topology(&[s], &TopologyConfig::default()) {
            TopologyPlan::Replace { loops, infeasible, .. } => {
                assert_eq!(loops.len(), 2);
                assert!(!infeasible);
                assert_eq!(loops.concat(), ids(200));
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn restored_limit_merges_back() {
        let parts = split_even(&ids(200), 2);
        let a = summary(parts[0].clone(), 3.84, 0.1, 10.0);
        let b = summary(parts[1].clone(), 3.84, 0.1, 10.0);
        match plan_topology(&[a, b], &TopologyConfig::default()) {
            TopologyPlan::Replace { loops, .. } => assert_eq!(loops, vec![ids(200)]),
            other => panic!("expected merge, got {other:?}"),
        }
    }

    #[test]
    fn split_loops_do_not_merge_immediately() {
        let parts = split_even(&ids(200), 2);
        let a = summary(parts[0].clone(), 3.84, 0.1, 7.6);
        let b = summary(parts[1].clone(), 3.84, 0.1, 7.6);
        assert_eq!(plan_topology(&[a, b], &TopologyConfig::default()), TopologyPlan::Keep);
    }

    #[test]
    fn loop_budget_caps_split() {
        let s = summary(ids(100), 10.0, 0.1, 1.0);
        let cfg = TopologyConfig {
            max_loops: 3,
            ..TopologyConfig::default()
        };
        match plan_topology(&[s], &cfg) {
            TopologyPlan::Replace { loops, infeasible, .. } => {
                assert_eq!(loops.len(), 3);
                assert!(infeasible);
            }
            other => panic!("expected capped split, got {other:?}"),
        }
    }
}
