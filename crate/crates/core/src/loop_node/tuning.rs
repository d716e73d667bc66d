//! Closed-form tuning rules for the target age `alpha` and the weight `mu`.

use crate::loop_node::stats::DeltaStats;
use crate::time::{Duration, Timestamp};

/// Inclusive clamp range for `mu`, in ns^-1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuBounds {
    pub floor: f64,
    pub cap: f64,
}

impl Default for MuBounds {
    fn default() -> Self {
        MuBounds {
            floor: 1e-12,
            cap: 1e3,
        }
    }
}

impl MuBounds {
    pub fn clamp(&self, mu: f64) -> f64 {
        if mu.is_nan() {
            return self.cap;
        }
        mu.clamp(self.floor, self.cap)
    }
}

/// `-1`, `0` or `+1`.
pub fn sign(d: Duration) -> i8 {
    d.signum() as i8
}

/// Age that centers the reads of a loop around `t`: `delta/2 + (l_s - t)`.
pub fn optimal_alpha(delta: Duration, l_s: Timestamp, t: Timestamp) -> Duration {
    delta / 2 + (l_s - t)
}

/// Same rule expressed with a mean hop time for a loop segment of `sensors`
/// nodes starting at `start`: `hop * (sensors + 1) / 2 + (start - t)`.
pub fn segment_alpha(hop_ns: f64, sensors: usize, start: Timestamp, t: Timestamp) -> Duration {
    Duration((hop_ns * (sensors as f64 + 1.0) / 2.0).round() as i64) + (start - t)
}

/// `C_gmax - 3 sigma`; just `C_gmax` while there is no spread evidence.
pub fn target_dmax(c_gmax: Duration, stats: &DeltaStats) -> Duration {
    if !stats.has_spread() {
        return c_gmax;
    }
    c_gmax - Duration((3.0 * stats.std_dev()).round() as i64)
}

/// `1 / (D_max - 2 delta)`, or the cap when that is undefined.
pub fn init_mu(d_max: Duration, delta: Duration, bounds: MuBounds) -> f64 {
    let slack = d_max - delta * 2;
    if slack <= Duration::ZERO {
        return bounds.cap;
    }
    bounds.clamp(1.0 / slack.as_nanos_f64())
}

/// `mu / (2 * direction * w * mu + 1)`, so that `1/mu` moves by `2 * direction * w`
/// with `direction = sign(D_max - C_g)`.
pub fn update_mu(mu: f64, w: Duration, direction: i8, bounds: MuBounds) -> f64 {
    if direction == 0 {
        return mu;
    }
    let denom = 2.0 * direction as f64 * w.as_nanos_f64() * mu + 1.0;
    if denom <= 0.0 {
        return bounds.cap;
    }
    bounds.clamp(mu / denom)
}

/// Guarantee predicted for a stable roundtrip when every node can read at its optimum.
pub fn closed_form_guarantee(delta: Duration, mu: f64) -> f64 {
    let d = delta.as_nanos_f64();
    if mu <= 0.0 {
        return 2.0 * d;
    }
    (d + 1.0 / mu).min(2.0 * d)
}

/// Read time minimizing the unbanded join cost on a continuous buffer.
pub fn optimal_read_time(t: Timestamp, t_now: Timestamp, alpha: Duration, mu: f64) -> Timestamp {
    let target = t_now - alpha;
    let r = (t - target).as_nanos_f64();
    if mu <= 0.0 || r == 0.0 || mu < 1.0 / (2.0 * r.abs()) {
        return t;
    }
    target + Duration((r.signum() / (2.0 * mu)).round() as i64)
}

/// Step-width automaton: doubles the step while the direction holds and
/// halves it twice after a direction change.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepWidth {
    s: i32,
    p: i8,
    unit: Duration,
    s_min: i32,
    s_max: i32,
}

impl StepWidth {
    pub fn new(unit: Duration, s_min: i32, s_max: i32) -> Self {
        StepWidth {
            s: 0,
            p: 0,
            unit,
            s_min,
            s_max,
        }
    }

    pub fn exponent(&self) -> i32 {
        self.s
    }

    pub fn direction_memory(&self) -> i8 {
        self.p
    }

    pub fn width(&self) -> Duration {
        Duration((self.unit.as_nanos_f64() * 2f64.powi(self.s)).round() as i64)
    }

    /// Advances the automaton with `direction = sign(D_max - C_g)` and returns `w`.
    pub fn step(&mut self, direction: i8) -> Duration {
        self.s += if self.p == direction { 1 } else { -1 };
        self.s = self.s.clamp(self.s_min, self.s_max);
        let w = self.width();
        self.p = if self.p == 0 || self.p == direction {
            direction
        } else {
            0
        };
        w
    }

    /// Records the direction without moving the step (used while `mu` is pinned).
    pub fn hold(&mut self, direction: i8) {
        self.p = direction;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_update_examples() {
        let b = MuBounds::default();
        assert_eq!(update_mu(0.25, Duration(3), 0, b), 0.25);
        assert!((update_mu(1.0, Duration(1), 1, b) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(update_mu(1.0, Duration(1), -1, b), b.cap);
    }

    #[test]
    fn init_mu_examples() {
        let b = MuBounds::default();
        assert_eq!(init_mu(Duration(2 * 7 + 1), Duration(7), b), 1.0);
        assert_eq!(init_mu(Duration(3), Duration(1), b), 1.0);
        assert_eq!(init_mu(Duration(20), Duration(10), b), b.cap);
        assert_eq!(init_mu(Duration(5), Duration(10), b), b.cap);
    }

    #[test]
    fn dmax_examples() {
        let c = Duration::from_secs(2);
        assert_eq!(target_dmax(c, &DeltaStats::new()), c);
        let mut flat = DeltaStats::new();
        for _ in 0..10 {
            flat.push(5.0e8, 0.99);
        }
        assert_eq!(target_dmax(c, &flat), c);
        let sd = 1e8;
        let s = DeltaStats::seeded(1e9, sd * sd, 50.0);
        assert_eq!(target_dmax(c, &s), Duration::from_millis(1700));
    }

    #[test]
    fn alpha_centers_reads() {
        assert_eq!(optimal_alpha(Duration(6), Timestamp(0), Timestamp(0)), Duration(3));
        assert_eq!(optimal_alpha(Duration(6), Timestamp(10), Timestamp(4)), Duration(9));
        assert_eq!(segment_alpha(1.0, 5, Timestamp(0), Timestamp(0)), Duration(3));
    }

    #[test]
    fn optimal_read_time_branches() {
        let t = Timestamp(1_000);
        assert_eq!(optimal_read_time(t, Timestamp(5_000), Duration(1_000), 0.0), t);
        // r = 1000 - 4000 = -3000, mu >= 1/6000
        let opt = optimal_read_time(t, Timestamp(5_000), Duration(1_000), 0.001);
        assert_eq!(opt, Timestamp(4_000 - 500));
    }

    #[test]
    fn automaton_doubles_then_halves_twice() {
        let mut sw = StepWidth::new(Duration(8), -10, 20);
        assert_eq!(sw.step(1), Duration(4));
        assert_eq!(sw.step(1), Duration(8));
        assert_eq!(sw.step(1), Duration(16));
        assert_eq!(sw.step(-1), Duration(8));
        assert_eq!(sw.direction_memory(), 0);
        assert_eq!(sw.step(-1), Duration(4));
        assert_eq!(sw.direction_memory(), -1);
        assert_eq!(sw.step(-1), Duration(8));
    }
}
