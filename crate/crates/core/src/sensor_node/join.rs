//! Value selection: the cost trades read-time distance to `t` against the
//! squared distance of the value's age from the target age `alpha`.

use crate::coherence::{CoherenceError, Extremes, Sample};
use crate::time::{Duration, Timestamp};

/// Inputs of the join cost, all in the joining node's frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JoinParams {
    pub t: Timestamp,
    pub t_now: Timestamp,
    pub alpha: Duration,
    pub mu: f64,
    /// Zero-cost bands from values already in the tuple.
    pub bands: Option<Extremes>,
}

fn outside(x: i64, lo: i64, hi: i64) -> f64 {
    if x < lo {
        (lo - x) as f64
    } else if x > hi {
        (x - hi) as f64
    } else {
        0.0
    }
}

fn cost_unchecked(t_i: Timestamp, p: &JoinParams) -> f64 {
    let age = (p.t_now - t_i).as_nanos();
    match p.bands {
        None => {
            let ce = (t_i - p.t).abs().as_nanos_f64();
            let dev = (age - p.alpha.as_nanos()) as f64;
            ce + dev * dev * p.mu
        }
        Some(b) => {
            let ce = outside(t_i.as_nanos(), b.t_min.as_nanos(), b.t_max.as_nanos());
            let dev = outside(age, b.alpha_min.as_nanos(), b.alpha_max.as_nanos());
            ce + dev * dev * p.mu
        }
    }
}

pub fn join_cost(t_i: Timestamp, p: &JoinParams) -> Result<f64, CoherenceError> {
    if !(p.mu >= 0.0) {
        return Err(CoherenceError::InvalidArgument(format!(
            "mu must be non-negative, got {}",
            p.mu
        )));
    }
    Ok(cost_unchecked(t_i, p))
}

/// Ordering key: cost, then distance to `t`, then newer first.
fn key(s: &Sample, p: &JoinParams) -> (f64, i64, i64) {
    (
        cost_unchecked(s.read_time, p),
        (s.read_time - p.t).abs().as_nanos(),
        -s.read_time.as_nanos(),
    )
}

/// Entry minimizing the join cost. Ties prefer the entry closer to `t`, then the newer one.
pub fn select_value<'a, I>(entries: I, p: &JoinParams) -> Option<Sample>
where
    I: IntoIterator<Item = &'a Sample>,
{
    let mut best: Option<(Sample, (f64, i64, i64))> = None;
    for s in entries {
        let k = key(s, p);
        let better = match &best {
            None => true,
            Some((_, bk)) => k.partial_cmp(bk) == Some(std::cmp::Ordering::Less),
        };
        if better {
            best = Some((*s, k));
        }
    }
    best.map(|(s, _)| s)
}

/// True when `a` would be preferred over `b` by [`select_value`].
pub fn prefers(a: &Sample, b: &Sample, p: &JoinParams) -> bool {
    key(a, p).partial_cmp(&key(b, p)) == Some(std::cmp::Ordering::Less)
}
