//! Per-loop tuning state: target age, weight `mu`, step automaton and roundtrip statistics.

use serde::Deserialize;

use crate::coherence::{LoopId, NodeId};
use crate::loop_node::stats::{DeltaStats, DEFAULT_FORGETTING};
use crate::loop_node::tuning::{init_mu, segment_alpha, sign, target_dmax, update_mu, MuBounds, StepWidth};
use crate::time::{Duration, Timestamp};

#[derive(Clone, Copy, Debug, Default, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum MuMode {
    /// Tuned by the step automaton.
    #[default]
    Adaptive,
    /// Held at the given value (ns^-1).
    Fixed(f64),
    /// Held at the floor: pure read-time optimization.
    Floor,
    /// Held at the cap: pure age optimization.
    Cap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerConfig {
    pub c_gmax: Duration,
    pub step_unit: Duration,
    pub s_min: i32,
    pub s_max: i32,
    pub mu_bounds: MuBounds,
    pub mu_mode: MuMode,
    pub forgetting: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            c_gmax: Duration::from_secs(10),
            step_unit: Duration::from_millis(1),
            s_min: -10,
            s_max: 20,
            mu_bounds: MuBounds::default(),
            mu_mode: MuMode::Adaptive,
            forgetting: DEFAULT_FORGETTING,
        }
    }
}

/// What the loop node learned from one returned tuple of this loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopObservation {
    pub l_s: Timestamp,
    /// Roundtrip time `l_e - l_s`.
    pub delta: Duration,
    pub c_g: Duration,
    /// Number of message deliveries the tuple needed.
    pub hops: u32,
    pub adhoc: bool,
}

/// What changed after an observation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TuningStep {
    pub updated: bool,
    pub direction: i8,
    pub width: Duration,
    pub mu: f64,
    pub d_max: Duration,
}

#[derive(Clone, Debug)]
pub struct LoopController {
    id: LoopId,
    nodes: Vec<NodeId>,
    config: ControllerConfig,
    hop_estimate: f64,
    mu: f64,
    step: StepWidth,
    /// Dispatch time of the first request carrying the latest parameters.
    /// `None` while that request has not been dispatched yet.
    t_l: Option<Timestamp>,
    stats: DeltaStats,
    d_max: Duration,
    initialized: bool,
    observations: u64,
}

impl LoopController {
    pub fn new(id: LoopId, nodes: Vec<NodeId>, config: ControllerConfig) -> Self {
        let mu = match config.mu_mode {
            MuMode::Adaptive => config.mu_bounds.cap,
            other => fixed_mu(other, &config.mu_bounds),
        };
        let step = StepWidth::new(config.step_unit, config.s_min, config.s_max);
        let d_max = config.c_gmax;
        LoopController {
            id,
            nodes,
            config,
            hop_estimate: 0.0,
            mu,
            step,
            t_l: None,
            stats: DeltaStats::new(),
            d_max,
            initialized: false,
            observations: 0,
        }
    }

    /// Starts from a prior on roundtrip statistics (after a split or merge).
    pub fn with_prior(mut self, stats: DeltaStats) -> Self {
        self.stats = stats;
        self.hop_estimate = stats.mean() / (self.nodes.len() as f64 + 1.0);
        self.d_max = target_dmax(self.config.c_gmax, &self.stats);
        self
    }

    pub fn id(&self) -> LoopId {
        self.id
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn d_max(&self) -> Duration {
        self.d_max
    }

    pub fn c_gmax(&self) -> Duration {
        self.config.c_gmax
    }

    pub fn stats(&self) -> &DeltaStats {
        &self.stats
    }

    pub fn hop_estimate(&self) -> f64 {
        self.hop_estimate
    }

    pub fn step(&self) -> &StepWidth {
        &self.step
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn set_c_gmax(&mut self, c_gmax: Duration) {
        self.config.c_gmax = c_gmax;
        self.d_max = target_dmax(c_gmax, &self.stats);
    }

    /// Target age for a segment of `sensors` nodes starting at `start`.
    pub fn alpha_for(&self, sensors: usize, start: Timestamp, t: Timestamp) -> Duration {
        segment_alpha(self.hop_estimate, sensors, start, t)
    }

    /// Called when a request is dispatched at `l_s`.
    pub fn on_dispatch(&mut self, l_s: Timestamp) {
        if self.initialized && self.t_l.is_none() {
            self.t_l = Some(l_s);
        }
    }

    /// Processes a returned tuple: statistics, `D_max`, and, once earlier
    /// updates have taken effect, the next `alpha`/`mu`.
    pub fn observe(&mut self, obs: LoopObservation) -> TuningStep {
        self.observations += 1;
        self.stats.push_duration(obs.delta, self.config.forgetting);
        self.d_max = target_dmax(self.config.c_gmax, &self.stats);
        let hops = obs.hops.max(1) as f64;

        if !self.initialized {
            self.hop_estimate = obs.delta.as_nanos_f64() / hops;
            if self.config.mu_mode == MuMode::Adaptive {
                self.mu = init_mu(self.d_max, obs.delta, self.config.mu_bounds);
            }
            self.initialized = true;
            self.t_l = None;
            return TuningStep {
                updated: true,
                direction: 0,
                width: Duration::ZERO,
                mu: self.mu,
                d_max: self.d_max,
            };
        }

        let took_effect = self.t_l.is_some_and(|t_l| obs.l_s >= t_l);
        if obs.adhoc || !took_effect {
            return TuningStep {
                updated: false,
                direction: 0,
                width: Duration::ZERO,
                mu: self.mu,
                d_max: self.d_max,
            };
        }

        self.hop_estimate = obs.delta.as_nanos_f64() / hops;
        let direction = sign(self.d_max - obs.c_g);
        let mut width = Duration::ZERO;
        if self.config.mu_mode == MuMode::Adaptive {
            let inv = 1.0 / self.mu;
            let bounds = self.config.mu_bounds;
            // C_g cannot grow past 2*delta or shrink below delta: keep mu where it is
            let saturated_high = direction > 0 && inv >= obs.delta.as_nanos_f64();
            let saturated_low = direction < 0 && self.mu >= bounds.cap;
            if saturated_high || saturated_low {
                self.step.hold(direction);
            } else {
                width = self.step.step(direction);
                self.mu = update_mu(self.mu, width, direction, bounds);
            }
        }
        self.t_l = None;
        TuningStep {
            updated: true,
            direction,
            width,
            mu: self.mu,
            d_max: self.d_max,
        }
    }
}

fn fixed_mu(mode: MuMode, bounds: &MuBounds) -> f64 {
    match mode {
        MuMode::Fixed(v) => v,
        MuMode::Floor => bounds.floor,
        MuMode::Cap | MuMode::Adaptive => bounds.cap,
    }
}
