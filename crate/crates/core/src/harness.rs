//! Runs scenarios and writes their CSV outputs and summaries.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{run_baseline, BaselineOutput};
use crate::multilat::{
    estimate_region, guarantee_region, locate_arrivals, AgeBounds, Location, MultilatError, Point, Region, Scene,
};
use crate::netsim::{self, SimError, SimOutput};
use crate::scenario::{ConfigError, Scenario};
use crate::time::{Duration, Timestamp};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("localization failed: {0}")]
    Locate(MultilatError),
}

impl HarnessError {
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config(_))
    }
}

/// `C_gmax` in effect at `at` given the initial value and a sorted schedule.
pub fn cgmax_at(base: Duration, schedule: &[(Timestamp, Duration)], at: Timestamp) -> Duration {
    schedule
        .iter()
        .take_while(|(t, _)| *t <= at)
        .last()
        .map_or(base, |(_, v)| *v)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub tuples: usize,
    /// Tuples dispatched after the warmup.
    pub measured: usize,
    /// Share of measured tuples with `C_g` within the `C_gmax` in effect at dispatch.
    pub within_cgmax: f64,
    pub median_cg_ns: i64,
    pub median_ce_ns: i64,
    pub median_dt_ns: i64,
    pub median_delta_ns: i64,
    /// Tuples whose true read-time span exceeds `C_g`.
    pub soundness_violations: usize,
    pub degraded: usize,
    pub total_reads: u64,
    pub loop_node_inbound: u64,
    pub final_loop_count: usize,
    pub topology_changes: usize,
    pub infeasible: bool,
    pub late_tuples: u64,
}

fn median(mut v: Vec<i64>) -> i64 {
    if v.is_empty() {
        return 0;
    }
    v.sort_unstable();
    v[v.len() / 2]
}

pub fn summarize(out: &SimOutput, base: Duration, schedule: &[(Timestamp, Duration)], warmup: Duration) -> RunSummary {
    let start = Timestamp(warmup.as_nanos());
    let measured: Vec<_> = out.emitted.iter().filter(|e| e.result.l_s >= start).collect();
    let within = measured
        .iter()
        .filter(|e| e.result.c_g <= cgmax_at(base, schedule, e.result.l_s))
        .count();
    let pick = |f: fn(&crate::tuple::ResultTuple) -> Duration| {
        median(measured.iter().map(|e| f(&e.result).as_nanos()).collect())
    };
    RunSummary {
        tuples: out.emitted.len(),
        measured: measured.len(),
        within_cgmax: if measured.is_empty() {
            0.0
        } else {
            within as f64 / measured.len() as f64
        },
        median_cg_ns: pick(|r| r.c_g),
        median_ce_ns: pick(|r| r.c_e),
        median_dt_ns: pick(|r| r.delta_t),
        median_delta_ns: pick(|r| r.delta),
        soundness_violations: out
            .emitted
            .iter()
            .filter(|e| e.c_real.is_some_and(|c| c > e.result.c_g))
            .count(),
        degraded: out.emitted.iter().filter(|e| e.result.degraded).count(),
        total_reads: out.reads.iter().sum(),
        loop_node_inbound: out.messages.loop_node_inbound,
        final_loop_count: out.final_loop_count,
        topology_changes: out.topology_changes.len(),
        infeasible: out.topology_changes.iter().any(|c| c.infeasible),
        late_tuples: out.late_tuples,
    }
}

#[derive(Serialize)]
struct TupleRow {
    seq: u64,
    t_ns: i64,
    delta_ns: i64,
    cg_ns: i64,
    ce_ns: i64,
    dt_ns: i64,
    dmax_ns: i64,
    c_real_ns: Option<i64>,
    loop_count: usize,
    degraded: bool,
}

#[derive(Serialize)]
struct ReadRow {
    node: usize,
    reads: u64,
}

#[derive(Serialize)]
struct TruthRow {
    payload: usize,
    node: u32,
    at_ns: i64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), HarnessError> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn write_summary<T: Serialize>(dir: &Path, summary: &T) -> Result<(), HarnessError> {
    let path = dir.join("summary.toml");
    let text = toml::to_string(summary).expect("summary serializes");
    fs::write(&path, text).map_err(io_err(&path))
}

/// Writes `tuples.csv`, `reads.csv`, `summary.toml` and, with tracing,
/// `events.tsv` and `truth.csv`.
pub fn write_outputs(dir: &Path, out: &SimOutput, summary: &RunSummary) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_csv(
        &dir.join("tuples.csv"),
        out.emitted.iter().map(|e| {
            let r = &e.result;
            TupleRow {
                seq: r.seq,
                t_ns: r.t.as_nanos(),
                delta_ns: r.delta.as_nanos(),
                cg_ns: r.c_g.as_nanos(),
                ce_ns: r.c_e.as_nanos(),
                dt_ns: r.delta_t.as_nanos(),
                dmax_ns: r.d_max.as_nanos(),
                c_real_ns: e.c_real.map(Duration::as_nanos),
                loop_count: r.loop_count,
                degraded: r.degraded,
            }
        }),
    )?;
    write_csv(
        &dir.join("reads.csv"),
        out.reads.iter().enumerate().map(|(node, &reads)| ReadRow { node, reads }),
    )?;
    write_summary(dir, summary)?;
    if !out.trace.is_empty() {
        let path = dir.join("events.tsv");
        let mut text = String::from("global_ns\tkind\tnode\tdetail\n");
        for line in &out.trace {
            text.push_str(line);
            text.push('\n');
        }
        fs::write(&path, text).map_err(io_err(&path))?;
        write_csv(
            &dir.join("truth.csv"),
            out.truth.iter().enumerate().map(|(payload, g)| TruthRow {
                payload,
                node: g.node.0,
                at_ns: g.at.as_nanos(),
            }),
        )?;
    }
    Ok(())
}

/// Runs one scenario and writes its outputs to `out_dir` when given.
pub fn run_scenario(s: &Scenario, out_dir: Option<&Path>) -> Result<(SimOutput, RunSummary), HarnessError> {
    let cfg = s.sim_config()?;
    let schedule = cfg.c_gmax_schedule.clone();
    let out = netsim::run(cfg)?;
    let summary = summarize(&out, s.c_gmax, &schedule, s.warmup);
    if let Some(dir) = out_dir {
        write_outputs(dir, &out, &summary)?;
    }
    Ok((out, summary))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineSummary {
    pub slots: u64,
    pub inbound_messages: u64,
    pub transmissions: u64,
    pub complete: u64,
    pub median_ce_ns: i64,
    pub median_latency_ns: i64,
}

pub fn summarize_baseline(out: &BaselineOutput) -> BaselineSummary {
    BaselineSummary {
        slots: out.slots,
        inbound_messages: out.inbound_messages,
        transmissions: out.transmissions,
        complete: out.rows.iter().filter(|r| r.complete).count() as u64,
        median_ce_ns: median(out.rows.iter().map(|r| r.ce_ns).collect()),
        median_latency_ns: median(out.rows.iter().map(|r| r.latency_ns).collect()),
    }
}

/// Runs the central join on the scenario's network and clocks.
pub fn run_baseline_scenario(
    s: &Scenario,
    out_dir: Option<&Path>,
) -> Result<(BaselineOutput, BaselineSummary), HarnessError> {
    let cfg = s.sim_config()?;
    let out = run_baseline(&cfg);
    let summary = summarize_baseline(&out);
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_csv(&dir.join("baseline.csv"), out.rows.iter())?;
        write_summary(dir, &summary)?;
    }
    Ok((out, summary))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub nodes: usize,
    pub c_gmax_fraction: f64,
    pub c_gmax_ns: i64,
    pub tuples: usize,
    pub within_cgmax: f64,
    pub median_cg_ns: i64,
    pub median_ce_ns: i64,
    pub median_dt_ns: i64,
    pub final_loops: usize,
    pub infeasible: bool,
}

/// Scenario for one cell of the sweep grid. Failures and alternatives that
/// name nodes outside the cell are dropped.
pub fn sweep_cell(base: &Scenario, nodes: usize, fraction: f64) -> Result<Scenario, ConfigError> {
    let mut s = base.clone();
    let link = s.network.link()?;
    let roundtrip = link.base_latency * (nodes as i64 + 1);
    s.node_count = nodes;
    s.c_gmax = Duration::from_secs_f64(roundtrip.as_secs_f64() * fraction);
    s.c_gmax_schedule.clear();
    if let Some(d) = s.sweep.as_ref().and_then(|w| w.cell_duration) {
        s.duration = d;
    }
    s.clock.offsets.truncate(nodes);
    let n = nodes as u32;
    for f in &mut s.failures {
        f.nodes.retain(|&id| id < n);
    }
    s.failures.retain(|f| !f.nodes.is_empty());
    s.fallback.alternatives.retain(|p| p.iter().all(|&id| id < n));
    s.sweep = None;
    Ok(s)
}

/// Runs every grid cell in parallel and writes `heatmap.csv` when `out_dir` is given.
pub fn sweep(s: &Scenario, out_dir: Option<&Path>) -> Result<Vec<SweepCell>, HarnessError> {
    let grid = s.sweep.as_ref().ok_or_else(|| ConfigError::Invalid {
        field: "sweep",
        message: "scenario has no [sweep] section".into(),
    })?;
    let cells: Vec<(usize, f64)> = grid
        .node_counts
        .iter()
        .flat_map(|&n| grid.c_gmax_fractions.iter().map(move |&f| (n, f)))
        .collect();
    let scenarios = cells
        .iter()
        .map(|&(n, f)| sweep_cell(s, n, f))
        .collect::<Result<Vec<_>, _>>()?;
    let results = scenarios
        .par_iter()
        .zip(cells.par_iter())
        .map(|(cell, &(n, f))| {
            let (_, sum) = run_scenario(cell, None)?;
            Ok(SweepCell {
                nodes: n,
                c_gmax_fraction: f,
                c_gmax_ns: cell.c_gmax.as_nanos(),
                tuples: sum.measured,
                within_cgmax: sum.within_cgmax,
                median_cg_ns: sum.median_cg_ns,
                median_ce_ns: sum.median_ce_ns,
                median_dt_ns: sum.median_dt_ns,
                final_loops: sum.final_loop_count,
                infeasible: sum.infeasible,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_csv(&dir.join("heatmap.csv"), results.iter())?;
    }
    Ok(results)
}

/// Input of the `multilat` subcommand. Arrival times and bounds are in seconds.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultilatConfig {
    pub speed: f64,
    pub sensors: [[f64; 2]; 3],
    /// Forward-simulates exact arrivals from this source when `arrivals` is absent.
    pub source: Option<[f64; 2]>,
    #[serde(default)]
    pub t0: f64,
    pub arrivals: Option<[f64; 3]>,
    pub guarantee: Option<GuaranteeInput>,
    pub estimate: Option<EstimateInput>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuaranteeInput {
    pub l_s: f64,
    pub l_e: f64,
    /// Per-sensor `[min, max]` value age.
    pub age: [[f64; 2]; 3],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateInput {
    /// Per-sensor `[t_min, t_max]` reported read times.
    pub reported: [[f64; 2]; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultilatReport {
    pub location: Option<Location>,
    pub guarantee: Option<Region>,
    pub estimate: Option<Region>,
}

#[derive(Serialize)]
struct VertexRow {
    x_m: f64,
    y_m: f64,
}

impl MultilatConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(toml::from_str(&text)?)
    }

    pub fn scene(&self) -> Result<Scene, ConfigError> {
        Scene::new(self.sensors.map(Point::from), self.speed).map_err(|e| ConfigError::Invalid {
            field: "sensors",
            message: e.to_string(),
        })
    }
}

/// Locates the source and computes the requested regions. Writes
/// `location.csv`, `guarantee.csv` and `estimate.csv` to `out_dir` when given.
pub fn run_multilat(cfg: &MultilatConfig, out_dir: Option<&Path>) -> Result<MultilatReport, HarnessError> {
    let scene = cfg.scene()?;
    let bad = |field: &'static str| {
        move |e: MultilatError| {
            HarnessError::Config(ConfigError::Invalid {
                field,
                message: e.to_string(),
            })
        }
    };
    let arrivals = cfg
        .arrivals
        .or_else(|| cfg.source.map(|s| scene.arrivals(Point::from(s), cfg.t0)));
    let location = match arrivals {
        Some(t) => Some(locate_arrivals(&scene, t).map_err(HarnessError::Locate)?),
        None => None,
    };
    let guarantee = match &cfg.guarantee {
        Some(g) => {
            let age = g.age.map(|[min, max]| AgeBounds { min, max });
            Some(guarantee_region(&scene, g.l_s, g.l_e, age).map_err(bad("guarantee"))?)
        }
        None => None,
    };
    let estimate = match &cfg.estimate {
        Some(e) => Some(estimate_region(&scene, e.reported.map(|[a, b]| (a, b))).map_err(bad("estimate"))?),
        None => None,
    };
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        if let Some(l) = &location {
            let path = dir.join("location.csv");
            let text = format!("x_m,y_m,a_m\n{},{},{}\n", l.x, l.y, l.a);
            fs::write(&path, text).map_err(io_err(&path))?;
        }
        for (name, region) in [("guarantee.csv", &guarantee), ("estimate.csv", &estimate)] {
            if let Some(r) = region {
                write_csv(
                    &dir.join(name),
                    r.vertices.iter().map(|p| VertexRow { x_m: p.x, y_m: p.y }),
                )?;
            }
        }
    }
    Ok(MultilatReport {
        location,
        guarantee,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
        node_count = 6
        duration = "20s"
        request_period = "500ms"
        c_gmax = "1s"
        warmup = "5s"
        [network]
        preset = "wifi"
        [clock]
        preset = "ideal"
        [scheduler]
        kind = "periodic"
        period = "20ms"
        [output]
        trace = true
        [sweep]
        node_counts = [3, 5]
        c_gmax_fractions = [1.0, 4.0]
        cell_duration = "10s"
    "#;

    #[test]
    fn cgmax_schedule_lookup() {
        let sched = [
            (Timestamp(10), Duration(5)),
            (Timestamp(20), Duration(7)),
        ];
        assert_eq!(cgmax_at(Duration(9), &sched, Timestamp(0)), Duration(9));
        assert_eq!(cgmax_at(Duration(9), &sched, Timestamp(10)), Duration(5));
        assert_eq!(cgmax_at(Duration(9), &sched, Timestamp(99)), Duration(7));
    }

    #[test]
    fn run_writes_all_files() {
        let s = Scenario::from_toml(SMALL).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (out, sum) = run_scenario(&s, Some(dir.path())).unwrap();
        for f in ["tuples.csv", "reads.csv", "summary.toml", "events.tsv", "truth.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let text = fs::read_to_string(dir.path().join("tuples.csv")).unwrap();
        assert!(text.starts_with("seq,t_ns,delta_ns,cg_ns,ce_ns,dt_ns,dmax_ns,"));
        assert_eq!(text.lines().count(), out.emitted.len() + 1);
        assert!(sum.measured > 0 && sum.measured < sum.tuples);
        assert_eq!(sum.soundness_violations, 0);
        assert_eq!(sum.within_cgmax, 1.0);
    }

    #[test]
    fn baseline_writes_csv() {
        let s = Scenario::from_toml(SMALL).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (_, sum) = run_baseline_scenario(&s, Some(dir.path())).unwrap();
        assert_eq!(sum.inbound_messages, 6 * 40);
        let text = fs::read_to_string(dir.path().join("baseline.csv")).unwrap();
        assert!(text.starts_with("slot,t_ns,ce_ns,latency_ns,matched,complete"));
    }

    #[test]
    fn sweep_covers_grid() {
        let s = Scenario::from_toml(SMALL).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cells = sweep(&s, Some(dir.path())).unwrap();
        assert_eq!(cells.len(), 4);
        let text = fs::read_to_string(dir.path().join("heatmap.csv")).unwrap();
        assert_eq!(text.lines().count(), 5);
        // generous budget fits in one loop
        let easy = cells.iter().find(|c| c.nodes == 3 && c.c_gmax_fraction == 4.0).unwrap();
        assert_eq!(easy.within_cgmax, 1.0);
    }

    #[test]
    fn multilat_writes_regions() {
        let cfg: MultilatConfig = toml::from_str(
            r#"
            speed = 343.0
            sensors = [[100.0, 200.0], [7000.0, 1000.0], [4200.0, 4000.0]]
            source = [3456.0, 1234.0]
            [guarantee]
            l_s = 29.0
            l_e = 31.0
            age = [[19.761868, 19.761868], [19.645141, 19.645141], [21.649232, 21.649232]]
            "#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rep = run_multilat(&cfg, Some(dir.path())).unwrap();
        let loc = rep.location.unwrap();
        assert!((loc.x - 3456.0).abs() < 1e-6 && (loc.y - 1234.0).abs() < 1e-6);
        let g = rep.guarantee.unwrap();
        assert_eq!(g.vertices.len(), 6);
        assert!(g.contains(loc.point(), 1e-3));
        let text = fs::read_to_string(dir.path().join("guarantee.csv")).unwrap();
        assert_eq!(text.lines().next(), Some("x_m,y_m"));
        assert_eq!(text.lines().count(), 7);
        assert!(!dir.path().join("estimate.csv").exists());
    }
}
