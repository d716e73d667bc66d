//! Oscillator-level clock model.
//!
//! A clock counts ticks of an oscillator whose rate deviates from nominal by a
//! drift rate `p`, sampled once per instance. Over `n` nominal ticks the clock
//! reports `n + sign(p) * Binomial(n, |p|)` ticks, i.e. each nominal tick gains
//! or loses an extra tick with probability `|p|`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::Deserialize;
use thiserror::Error;

use crate::time::{Duration, Timestamp, NANOS_PER_SEC};

/// Above this expected number of drift ticks the binomial is replaced by its
/// normal approximation.
const NORMAL_APPROX_THRESHOLD: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum ClockError {
    #[error("clock frequency must be positive, got {0}")]
    Frequency(f64),
    #[error("ppm bound must be non-negative, got {0}")]
    Ppm(f64),
    #[error("unknown clock preset `{0}`")]
    UnknownPreset(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClockSpec {
    pub frequency_hz: f64,
    pub ppm_bound: f64,
    pub label: String,
}

impl ClockSpec {
    pub fn new(label: &str, frequency_hz: f64, ppm_bound: f64) -> Result<Self, ClockError> {
        if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
            return Err(ClockError::Frequency(frequency_hz));
        }
        if !(ppm_bound >= 0.0 && ppm_bound.is_finite()) {
            return Err(ClockError::Ppm(ppm_bound));
        }
        Ok(ClockSpec {
            frequency_hz,
            ppm_bound,
            label: label.to_string(),
        })
    }

    /// Named presets. `ideal` is a 1 GHz, drift-free clock for exact tests.
    pub fn preset(name: &str) -> Result<Self, ClockError> {
        match name {
            "raspi-sys" => Self::new(name, 1e6, 40.0),
            "pcf2127" => Self::new(name, 32_768.0, 3.0),
            "tcvxo" => Self::new(name, 19.2e6, 0.1),
            "ideal" => Self::new(name, 1e9, 0.0),
            other => Err(ClockError::UnknownPreset(other.to_string())),
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["raspi-sys", "pcf2127", "tcvxo", "ideal"]
    }

    pub fn max_drift_rate(&self) -> f64 {
        self.ppm_bound * 1e-6
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TickMode {
    #[default]
    Stochastic,
    Deterministic,
}

/// Draws `p` uniformly from `[-ppm, +ppm] * 1e-6`.
pub fn sample_drift_rate<R: Rng + ?Sized>(spec: &ClockSpec, rng: &mut R) -> f64 {
    let bound = spec.max_drift_rate();
    if bound == 0.0 {
        return 0.0;
    }
    rng.gen_range(-bound..=bound)
}

/// Extra (or missed) ticks over `n` nominal ticks.
fn drift_ticks<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> i64 {
    if n == 0 || p == 0.0 {
        return 0;
    }
    let q = p.abs().min(1.0);
    let mean = n as f64 * q;
    let k = if mean > NORMAL_APPROX_THRESHOLD {
        let sd = (mean * (1.0 - q)).sqrt();
        let x: f64 = Normal::new(mean, sd)
            .map(|dist| dist.sample(rng))
            .unwrap_or(mean);
        x.round().clamp(0.0, n as f64) as i64
    } else {
        Binomial::new(n, q)
            .map(|dist| dist.sample(rng) as i64)
            .unwrap_or(mean.round() as i64)
    };
    if p > 0.0 {
        k
    } else {
        -k
    }
}

/// A drifting clock owned by one simulated node.
#[derive(Clone, Debug)]
pub struct ClockInstance {
    spec: ClockSpec,
    drift_rate: f64,
    offset: Duration,
    mode: TickMode,
    ticks: u64,
    nominal_ticks: u64,
    true_elapsed: Duration,
    rng: ChaCha8Rng,
}

impl ClockInstance {
    /// Samples a drift rate from `seed` and starts at `offset`.
    pub fn new(spec: ClockSpec, offset: Duration, mode: TickMode, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let drift_rate = sample_drift_rate(&spec, &mut rng);
        Self::with_drift_rate(spec, drift_rate, offset, mode, rng)
    }

    pub fn with_drift(spec: ClockSpec, drift_rate: f64, offset: Duration, mode: TickMode, seed: u64) -> Self {
        Self::with_drift_rate(spec, drift_rate, offset, mode, ChaCha8Rng::seed_from_u64(seed))
    }

    fn with_drift_rate(spec: ClockSpec, drift_rate: f64, offset: Duration, mode: TickMode, rng: ChaCha8Rng) -> Self {
        ClockInstance {
            spec,
            drift_rate,
            offset,
            mode,
            ticks: 0,
            nominal_ticks: 0,
            true_elapsed: Duration::ZERO,
            rng,
        }
    }

    /// The loop node's clock: no drift, no offset, nanosecond ticks.
    pub fn trusted() -> Self {
        let spec = ClockSpec::preset("ideal").expect("ideal preset");
        Self::with_drift(spec, 0.0, Duration::ZERO, TickMode::Deterministic, 0)
    }

    pub fn spec(&self) -> &ClockSpec {
        &self.spec
    }

    pub fn drift_rate(&self) -> f64 {
        self.drift_rate
    }

    pub fn offset(&self) -> Duration {
        self.offset
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn true_elapsed(&self) -> Duration {
        self.true_elapsed
    }

    fn ticks_to_duration(&self, ticks: u64) -> Duration {
        Duration((ticks as f64 / self.spec.frequency_hz * NANOS_PER_SEC as f64).floor() as i64)
    }

    /// Advances by `true_elapsed` of global time and returns the elapsed time
    /// this clock reports for the span.
    pub fn advance(&mut self, true_elapsed: Duration) -> Duration {
        if true_elapsed <= Duration::ZERO {
            return Duration::ZERO;
        }
        let before = self.now();
        self.true_elapsed += true_elapsed;
        let nominal_total =
            (self.true_elapsed.as_nanos() as f64 * self.spec.frequency_hz / NANOS_PER_SEC as f64).floor() as u64;
        let n = nominal_total.saturating_sub(self.nominal_ticks);
        self.nominal_ticks = nominal_total;
        let extra = match self.mode {
            TickMode::Deterministic => {
                // keep the cumulative count at round(total * (1 + p))
                let target = (nominal_total as f64 * (1.0 + self.drift_rate)).round() as i64;
                target - (self.ticks as i64 + n as i64)
            }
            TickMode::Stochastic => drift_ticks(n, self.drift_rate, &mut self.rng),
        };
        self.ticks = (self.ticks as i64 + n as i64 + extra).max(self.ticks as i64) as u64;
        self.now() - before
    }

    /// Advances to the given global time (no-op if already there).
    pub fn advance_to(&mut self, global: Timestamp) -> Timestamp {
        let target = Duration(global.as_nanos());
        if target > self.true_elapsed {
            self.advance(target - self.true_elapsed);
        }
        self.now()
    }

    pub fn now(&self) -> Timestamp {
        Timestamp(self.offset.as_nanos() + self.ticks_to_duration(self.ticks).as_nanos())
    }

    /// Global time at which this clock is expected to read `local`, assuming
    /// nominal rate from the current state. Used to schedule local timers.
    pub fn global_for_local(&self, local: Timestamp) -> Timestamp {
        let now_local = self.now();
        let span = local - now_local;
        let scaled = Duration((span.as_nanos() as f64 / (1.0 + self.drift_rate)).round() as i64);
        Timestamp(self.true_elapsed.as_nanos()) + scaled
    }
}
