use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use sense_core::harness::{self, HarnessError, MultilatConfig};
use sense_core::scenario::Scenario;

#[derive(Parser)]
#[command(name = "sense", version, about = "Sensing-loop simulator and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write tuples.csv, reads.csv and summary.toml
    Run(Common),
    /// Run the central-join baseline on the scenario's network
    Baseline(Common),
    /// Run the [sweep] grid and write heatmap.csv
    Sweep(Common),
    /// Locate a signal source and its precision regions
    Multilat(Common),
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to the config's output.dir, else the current directory)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write events.tsv and truth.csv
    #[arg(long)]
    trace: bool,
}

impl Common {
    fn scenario(&self) -> Result<Scenario, HarnessError> {
        let mut s = Scenario::load(&self.config)?;
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s.output.trace |= self.trace;
        Ok(s)
    }

    fn out_dir(&self, s: Option<&Scenario>) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| s.and_then(|s| s.output.dir.clone()))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn run(cmd: &Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run(c) => {
            let s = c.scenario()?;
            let dir = c.out_dir(Some(&s));
            let (_, sum) = harness::run_scenario(&s, Some(&dir))?;
            info!("wrote {}", dir.display());
            println!(
                "tuples={} within_cgmax={:.4} median_cg_ns={} median_ce_ns={} median_dt_ns={} loops={} violations={}",
                sum.tuples,
                sum.within_cgmax,
                sum.median_cg_ns,
                sum.median_ce_ns,
                sum.median_dt_ns,
                sum.final_loop_count,
                sum.soundness_violations
            );
        }
        Command::Baseline(c) => {
            let s = c.scenario()?;
            let dir = c.out_dir(Some(&s));
            let (_, sum) = harness::run_baseline_scenario(&s, Some(&dir))?;
            println!(
                "slots={} inbound={} complete={} median_ce_ns={} median_latency_ns={}",
                sum.slots, sum.inbound_messages, sum.complete, sum.median_ce_ns, sum.median_latency_ns
            );
        }
        Command::Sweep(c) => {
            let s = c.scenario()?;
            let dir = c.out_dir(Some(&s));
            let cells = harness::sweep(&s, Some(&dir))?;
            println!("cells={} heatmap={}", cells.len(), dir.join("heatmap.csv").display());
        }
        Command::Multilat(c) => {
            let cfg = MultilatConfig::load(&c.config)?;
            let dir = c.out_dir(None);
            let rep = harness::run_multilat(&cfg, Some(&dir))?;
            if let Some(l) = rep.location {
                println!("x={:.3} y={:.3} a={:.3}", l.x, l.y, l.a);
            }
            for (name, r) in [("guarantee", &rep.guarantee), ("estimate", &rep.estimate)] {
                if let Some(r) = r {
                    println!("{name}: {} vertices{}", r.vertices.len(), if r.unbounded { " (unbounded)" } else { "" });
                }
            }
        }
    }
    Ok(())
}

fn config_path(cmd: &Command) -> &Path {
    match cmd {
        Command::Run(c) | Command::Baseline(c) | Command::Sweep(c) | Command::Multilat(c) => &c.config,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_config() => {
            eprintln!("error: {}: {e}", config_path(&cli.command).display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
