//! When sensor nodes read their sensors.

use rand::Rng;
use serde::Deserialize;

use crate::loop_node::tuning::optimal_read_time;
use crate::time::{Duration, Timestamp};

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SchedulerKind {
    /// Read on demand while joining; every joined value has age 0.
    AdHoc,
    Periodic { period: Duration },
    /// Read at the optimum of the next known request.
    ScheduleNextRead {
        /// Full width of the uniform jitter window for extra samples.
        #[serde(default)]
        jitter: Duration,
        #[serde(default)]
        extra_samples: u32,
        /// Periodic reads at this period while no request has been seen for that long.
        #[serde(default = "default_snr_fallback")]
        fallback_period: Duration,
    },
}

fn default_snr_fallback() -> Duration {
    Duration::from_secs(10)
}

impl SchedulerKind {
    pub fn snr() -> Self {
        SchedulerKind::ScheduleNextRead {
            jitter: Duration::ZERO,
            extra_samples: 0,
            fallback_period: default_snr_fallback(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            SchedulerKind::Periodic { period } if *period <= Duration::ZERO => {
                Err(format!("periodic scheduler needs a positive period, got {period}"))
            }
            SchedulerKind::ScheduleNextRead { fallback_period, .. } if *fallback_period <= Duration::ZERO => {
                Err(format!("fallback_period must be positive, got {fallback_period}"))
            }
            SchedulerKind::ScheduleNextRead { jitter, .. } if jitter.is_negative() => {
                Err(format!("jitter must be non-negative, got {jitter}"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchedulerKind::AdHoc => "adhoc",
            SchedulerKind::Periodic { .. } => "periodic",
            SchedulerKind::ScheduleNextRead { .. } => "snr",
        }
    }
}

/// What a node expects of an upcoming request, in its own clock frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NextRequest {
    pub t: Timestamp,
    pub expected_t_now: Timestamp,
    pub alpha: Duration,
    pub mu: f64,
}

/// Smallest multiple of `period` that is `>= now`.
pub fn next_boundary(now: Timestamp, period: Duration) -> Timestamp {
    let p = period.as_nanos();
    let n = now.as_nanos();
    let k = n.div_euclid(p) + i64::from(n.rem_euclid(p) != 0);
    Timestamp(k * p)
}

/// The next read time for the scheduler, or `None` for ad-hoc reads.
pub fn next_read_time(kind: &SchedulerKind, now: Timestamp, hint: Option<&NextRequest>) -> Option<Timestamp> {
    match kind {
        SchedulerKind::AdHoc => None,
        SchedulerKind::Periodic { period } => Some(next_boundary(now, *period)),
        SchedulerKind::ScheduleNextRead { fallback_period, .. } => match hint {
            Some(h) => Some(optimal_read_time(h.t, h.expected_t_now, h.alpha, h.mu)),
            None => Some(next_boundary(now, *fallback_period)),
        },
    }
}

/// Reads for one upcoming request: the optimum plus `extra` uniform draws
/// within `+-jitter/2` of it.
pub fn snr_reads<R: Rng + ?Sized>(optimum: Timestamp, jitter: Duration, extra: u32, rng: &mut R) -> Vec<Timestamp> {
    let half = jitter.as_nanos() / 2;
    let mut out = Vec::with_capacity(1 + extra as usize);
    out.push(optimum);
    for _ in 0..extra {
        let off = if half > 0 { rng.gen_range(-half..=half) } else { 0 };
        out.push(optimum + Duration(off));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn periodic_rounds_up() {
        let k = SchedulerKind::Periodic {
            period: Duration::from_millis(20),
        };
        assert_eq!(
            next_read_time(&k, Timestamp::from_millis(5), None),
            Some(Timestamp::from_millis(20))
        );
        assert_eq!(
            next_read_time(&k, Timestamp::from_millis(40), None),
            Some(Timestamp::from_millis(40))
        );
        assert_eq!(
            next_read_time(&k, Timestamp::from_millis(-5), None),
            Some(Timestamp::ZERO)
        );
    }

    #[test]
    fn adhoc_never_schedules() {
        assert_eq!(next_read_time(&SchedulerKind::AdHoc, Timestamp(7), None), None);
    }

    #[test]
    fn snr_with_zero_mu_reads_at_t() {
        let hint = NextRequest {
            t: Timestamp::from_millis(2000),
            expected_t_now: Timestamp::from_millis(2500),
            alpha: Duration::from_millis(300),
            mu: 0.0,
        };
        assert_eq!(
            next_read_time(&SchedulerKind::snr(), Timestamp(0), Some(&hint)),
            Some(hint.t)
        );
    }

    #[test]
    fn snr_without_hint_behaves_periodic() {
        assert_eq!(
            next_read_time(&SchedulerKind::snr(), Timestamp::from_millis(1), None),
            Some(Timestamp::from_millis(10_000))
        );
    }

    #[test]
    fn snr_extra_samples_stay_in_window() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let reads = snr_reads(Timestamp(1_000), Duration(100), 5, &mut rng);
        assert_eq!(reads.len(), 6);
        assert_eq!(reads[0], Timestamp(1_000));
        assert!(reads.iter().all(|r| (r.as_nanos() - 1_000).abs() <= 50));
    }
}
