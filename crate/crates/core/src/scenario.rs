//! Experiment configuration files (TOML). Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::clock::{ClockSpec, TickMode};
use crate::coherence::NodeId;
use crate::fallback::FallbackConfig;
use crate::loop_node::tuning::MuBounds;
use crate::loop_node::{LoopNodeConfig, MuMode};
use crate::netsim::{FailureKind, FailureSpec, Jitter, LinkModel, SimConfig};
use crate::sensor_node::{JoinReference, SchedulerKind, SensorConfig};
use crate::time::{Duration, Timestamp};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// `lan`, `wifi` or `lte`; explicit fields override the preset.
    pub preset: Option<String>,
    pub base_latency: Option<Duration>,
    pub jitter: Option<Jitter>,
    pub drop_probability: Option<f64>,
    pub ack_timeout: Option<Duration>,
    #[serde(default)]
    pub processing_time: Duration,
}

impl NetworkConfig {
    pub fn link(&self) -> Result<LinkModel, ConfigError> {
        let mut link = match &self.preset {
            Some(p) => LinkModel::preset(p).map_err(|e| invalid("network.preset", e.to_string()))?,
            None => {
                let base = self
                    .base_latency
                    .ok_or_else(|| invalid("network", "either `preset` or `base_latency` is required"))?;
                LinkModel::constant(base)
            }
        };
        if let Some(b) = self.base_latency {
            link.base_latency = b;
        }
        if let Some(j) = self.jitter {
            link.jitter = j;
        }
        if let Some(d) = self.drop_probability {
            link.drop_probability = d;
        }
        if let Some(a) = self.ack_timeout {
            link.ack_timeout = a;
        }
        link.validate().map_err(|e| invalid("network", e.to_string()))?;
        Ok(link)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockConfig {
    #[serde(default = "default_clock")]
    pub preset: String,
    #[serde(default)]
    pub mode: TickMode,
    /// Explicit initial offsets, node 0 first.
    #[serde(default)]
    pub offsets: Vec<Duration>,
    /// Offsets of the remaining nodes are drawn uniformly from `[-max_offset, max_offset]`.
    #[serde(default)]
    pub max_offset: Duration,
}

fn default_clock() -> String {
    "raspi-sys".into()
}

impl Default for ClockConfig {
    fn default() -> Self {
        ClockConfig {
            preset: default_clock(),
            mode: TickMode::default(),
            offsets: Vec::new(),
            max_offset: Duration::ZERO,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    #[serde(default = "default_capacity")]
    pub buffer_capacity: usize,
    #[serde(default)]
    pub reference: JoinReference,
    /// Zero-cost bands from values already in the tuple; off by default.
    #[serde(default)]
    pub banded: bool,
    #[serde(default = "yes")]
    pub adhoc_capable: bool,
}

fn default_capacity() -> usize {
    crate::sensor_node::buffer::DEFAULT_CAPACITY
}

fn yes() -> bool {
    true
}

impl Default for SensorSection {
    fn default() -> Self {
        SensorSection {
            buffer_capacity: default_capacity(),
            reference: JoinReference::default(),
            banded: false,
            adhoc_capable: true,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(default)]
    pub mu_mode: MuMode,
    pub step_unit: Option<Duration>,
    pub latency_limit: Option<Duration>,
    pub hysteresis: Option<f64>,
    pub cooldown: Option<Duration>,
    pub min_observations: Option<u64>,
    pub round_timeout: Option<Duration>,
    pub mu_floor: Option<f64>,
    pub mu_cap: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FallbackSection {
    pub collocated: Option<bool>,
    pub staleness: Option<Duration>,
    pub recheck_period: Option<Duration>,
    /// `[missing, substitute]` node pairs.
    #[serde(default)]
    pub alternatives: Vec<[u32; 2]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgmaxStep {
    pub at: Duration,
    pub value: Duration,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureEntry {
    pub at: Duration,
    pub kind: FailureKind,
    pub nodes: Vec<u32>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub trace: bool,
}

/// Grid for the `sweep` subcommand.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub node_counts: Vec<usize>,
    /// `C_gmax` as multiples of the expected roundtrip `(N + 1) * base_latency`.
    pub c_gmax_fractions: Vec<f64>,
    pub cell_duration: Option<Duration>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub node_count: usize,
    pub duration: Duration,
    #[serde(default)]
    pub seed: u64,
    pub request_period: Duration,
    #[serde(default)]
    pub t_offset: Duration,
    pub c_gmax: Duration,
    #[serde(default)]
    pub c_gmax_schedule: Vec<CgmaxStep>,
    #[serde(default = "default_max_loops")]
    pub max_loops: usize,
    #[serde(default = "default_initial_loops")]
    pub initial_loops: usize,
    #[serde(default = "yes")]
    pub adaptive_topology: bool,
    /// Tuples emitted before this time are left out of summary statistics.
    #[serde(default)]
    pub warmup: Duration,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub clock: ClockConfig,
    pub scheduler: SchedulerKind,
    #[serde(default)]
    pub sensor: SensorSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub fallback: FallbackSection,
    #[serde(default)]
    pub failures: Vec<FailureEntry>,
    #[serde(default)]
    pub output: OutputSection,
    pub sweep: Option<SweepSection>,
}

fn default_max_loops() -> usize {
    8
}

fn default_initial_loops() -> usize {
    1
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let s: Scenario = toml::from_str(text)?;
        s.check()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.node_count == 0 {
            return Err(invalid("node_count", "must be positive"));
        }
        if self.duration <= Duration::ZERO {
            return Err(invalid("duration", "must be positive"));
        }
        if self.request_period <= Duration::ZERO {
            return Err(invalid("request_period", "must be positive"));
        }
        if self.c_gmax <= Duration::ZERO {
            return Err(invalid("c_gmax", "must be positive"));
        }
        if self.max_loops == 0 || self.initial_loops == 0 || self.initial_loops > self.max_loops {
            return Err(invalid("initial_loops", "must be in 1..=max_loops"));
        }
        if self.c_gmax_schedule.windows(2).any(|w| w[0].at > w[1].at) {
            return Err(invalid("c_gmax_schedule", "entries must be sorted by `at`"));
        }
        if self.failures.windows(2).any(|w| w[0].at > w[1].at) {
            return Err(invalid("failures", "entries must be sorted by `at`"));
        }
        self.scheduler.validate().map_err(|m| invalid("scheduler", m))?;
        ClockSpec::preset(&self.clock.preset).map_err(|e| invalid("clock.preset", e.to_string()))?;
        if self.clock.offsets.len() > self.node_count {
            return Err(invalid("clock.offsets", "more offsets than nodes"));
        }
        self.network.link()?;
        let n = self.node_count as u32;
        if let Some(bad) = self.failures.iter().flat_map(|f| &f.nodes).find(|&&id| id >= n) {
            return Err(invalid("failures", format!("node {bad} out of range (node_count = {n})")));
        }
        if let Some(bad) = self.fallback.alternatives.iter().flatten().find(|&&id| id >= n) {
            return Err(invalid("fallback.alternatives", format!("node {bad} out of range")));
        }
        if let Some(s) = &self.sweep {
            if s.node_counts.is_empty() || s.c_gmax_fractions.is_empty() {
                return Err(invalid("sweep", "grid axes must be nonempty"));
            }
            if s.c_gmax_fractions.iter().any(|f| !(*f > 0.0)) {
                return Err(invalid("sweep.c_gmax_fractions", "must be positive"));
            }
        }
        Ok(())
    }

    /// Per-node initial offsets: explicit ones first, the rest drawn from the seed.
    pub fn offsets(&self) -> Vec<Duration> {
        let mut out = self.clock.offsets.clone();
        let max = self.clock.max_offset.as_nanos().abs();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x000F_F5E7);
        while out.len() < self.node_count {
            let off = if max > 0 { rng.gen_range(-max..=max) } else { 0 };
            out.push(Duration(off));
        }
        out
    }

    pub fn sim_config(&self) -> Result<SimConfig, ConfigError> {
        let link = self.network.link()?;
        let clock = ClockSpec::preset(&self.clock.preset).map_err(|e| invalid("clock.preset", e.to_string()))?;
        let sensor = SensorConfig {
            scheduler: self.scheduler,
            buffer_capacity: self.sensor.buffer_capacity,
            expiry_horizon: self.request_period * 4,
            reference: self.sensor.reference,
            banded: self.sensor.banded,
            adhoc_capable: self.sensor.adhoc_capable,
            request_period: self.request_period,
        };
        let mut ln = LoopNodeConfig::new(self.request_period, self.c_gmax);
        ln.t_offset = self.t_offset;
        ln.adaptive_topology = self.adaptive_topology;
        ln.initial_loops = self.initial_loops;
        ln.topology.max_loops = self.max_loops;
        let c = &self.controller;
        ln.controller.mu_mode = c.mu_mode;
        if let Some(u) = c.step_unit {
            ln.controller.step_unit = u;
        }
        ln.controller.mu_bounds = MuBounds {
            floor: c.mu_floor.unwrap_or(MuBounds::default().floor),
            cap: c.mu_cap.unwrap_or(MuBounds::default().cap),
        };
        ln.topology.latency_limit = c.latency_limit;
        if let Some(h) = c.hysteresis {
            ln.topology.hysteresis = h;
        }
        if let Some(cd) = c.cooldown {
            ln.topology_cooldown = cd;
        }
        if let Some(m) = c.min_observations {
            ln.min_observations = m;
        }
        if let Some(rt) = c.round_timeout {
            ln.round_timeout = rt;
        }
        if let Some(col) = self.fallback.collocated {
            ln.collocated_fallback = col;
        }

        let mut cfg = SimConfig::new(self.node_count, link, clock, sensor, ln, self.duration, self.seed);
        cfg.tick_mode = self.clock.mode;
        cfg.offsets = self.offsets();
        cfg.processing_time = self.network.processing_time;
        let mut fb = FallbackConfig::for_period(self.request_period);
        fb.collocated = cfg.loop_node.collocated_fallback;
        if let Some(s) = self.fallback.staleness {
            fb.staleness = s;
        }
        if let Some(r) = self.fallback.recheck_period {
            fb.recheck_period = r;
        }
        fb.alternatives = self
            .fallback
            .alternatives
            .iter()
            .map(|[a, b]| (NodeId(*a), NodeId(*b)))
            .collect::<BTreeMap<_, _>>();
        cfg.fallback = fb;
        cfg.c_gmax_schedule = self
            .c_gmax_schedule
            .iter()
            .map(|s| (Timestamp(s.at.as_nanos()), s.value))
            .collect();
        cfg.failures = self
            .failures
            .iter()
            .map(|f| FailureSpec {
                at: Timestamp(f.at.as_nanos()),
                nodes: f.nodes.iter().copied().map(NodeId).collect(),
                kind: f.kind,
            })
            .collect();
        cfg.trace = self.output.trace;
        cfg.validate().map_err(|e| invalid("scenario", e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        node_count = 5
        duration = "10s"
        request_period = "200ms"
        c_gmax = "50ms"
        [network]
        preset = "lan"
        [scheduler]
        kind = "periodic"
        period = "20ms"
    "#;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        let cfg = s.sim_config().unwrap();
        assert_eq!(cfg.node_count, 5);
        assert_eq!(cfg.offsets, vec![Duration::ZERO; 5]);
        assert_eq!(cfg.sensor.expiry_horizon, Duration::from_millis(800));
        assert_eq!(cfg.fallback.staleness, Duration::from_millis(400));
        assert_eq!(cfg.fallback.recheck_period, Duration::from_secs(2));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("bogus = 1\n{MINIMAL}");
        let err = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn unsorted_schedule_is_rejected() {
        let text = format!(
            "{MINIMAL}\n[[c_gmax_schedule]]\nat = \"5s\"\nvalue = \"1s\"\n[[c_gmax_schedule]]\nat = \"1s\"\nvalue = \"1s\"\n"
        );
        assert!(matches!(
            Scenario::from_toml(&text),
            Err(ConfigError::Invalid { field: "c_gmax_schedule", .. })
        ));
    }

    #[test]
    fn random_offsets_are_bounded_and_seeded() {
        let text = MINIMAL.replace("[scheduler]", "[clock]\nmax_offset = \"10s\"\noffsets = [\"1s\"]\n[scheduler]");
        let s = Scenario::from_toml(&text).unwrap();
        let o = s.offsets();
        assert_eq!(o[0], Duration::from_secs(1));
        assert!(o.iter().all(|d| d.abs() <= Duration::from_secs(10)));
        assert_eq!(o, s.offsets());
    }

    #[test]
    fn failure_nodes_are_range_checked() {
        let text = format!("{MINIMAL}\n[[failures]]\nat = \"1s\"\nkind = \"crash\"\nnodes = [7]\n");
        assert!(matches!(
            Scenario::from_toml(&text),
            Err(ConfigError::Invalid { field: "failures", .. })
        ));
    }
}
