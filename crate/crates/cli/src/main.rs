//! `sim`: headless runs, replay checks, condition sweeps and the live
//! WebSocket endpoint for the operator console.

mod serve;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use awaresim_core::harness::{self, EventLog, HarnessError};
use awaresim_core::sim::{Condition, LeaderSide, Scenario};
use awaresim_core::SimConfig;
use clap::{Args, Parser, Subcommand};

const EXIT_INCOMPLETE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "sim",
    version,
    about = "Awareness-augmented telepresence robot simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scripted experiment headless.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write the NDJSON event log here.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Print the full metrics report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Re-run a recorded log and check it reproduces the recorded hash.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Sweep layouts and seeds under both conditions and both leader roles.
    Compare {
        /// Layout ids, e.g. `1-4` or `1,3`.
        #[arg(long, default_value = "1-4", value_parser = parse_layouts)]
        layouts: Vec<u8>,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Serve the live simulation over WebSocket.
    Serve {
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Stop after this many ticks instead of running until interrupted.
        #[arg(long)]
        ticks: Option<u64>,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML; defaults to a bundled layout.
    #[arg(long, conflicts_with = "layout")]
    scenario: Option<PathBuf>,
    /// Bundled layout id (1-4).
    #[arg(long)]
    layout: Option<u8>,
    #[arg(long)]
    condition: Option<Condition>,
    #[arg(long)]
    leader: Option<LeaderSide>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        let mut s = match &self.scenario {
            Some(path) => Scenario::from_file(path)?,
            None => Scenario::layout(self.layout.unwrap_or(1))?,
        };
        if let Some(c) = self.condition {
            s = s.with_condition(c);
        }
        if let Some(l) = self.leader {
            s = s.with_leader(l);
        }
        if let Some(seed) = self.seed {
            s = s.with_seed(seed);
        }
        Ok(s)
    }
}

fn parse_layouts(text: &str) -> Result<u8, String> {
    // clap calls this per value; ranges are expanded in `expand_layouts`
    text.parse::<u8>().map_err(|e| e.to_string())
}

/// Accepts `1-4`, `1,3` and mixtures such as `1,3-4`.
fn expand_layouts(args: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let value = if arg == "--layouts" {
            match iter.next() {
                Some(v) => v,
                None => {
                    out.push(arg);
                    continue;
                }
            }
        } else if let Some(v) = arg.strip_prefix("--layouts=") {
            v.to_string()
        } else {
            out.push(arg);
            continue;
        };
        for part in value.split(',') {
            let ids: Vec<String> = match part.split_once('-') {
                Some((a, b)) => match (a.trim().parse::<u8>(), b.trim().parse::<u8>()) {
                    (Ok(a), Ok(b)) if a <= b => (a..=b).map(|i| i.to_string()).collect(),
                    _ => vec![part.to_string()],
                },
                None => vec![part.trim().to_string()],
            };
            for id in ids {
                out.push("--layouts".into());
                out.push(id);
            }
        }
    }
    out
}

fn run(
    scenario: ScenarioArgs,
    log: Option<PathBuf>,
    json: bool,
    config: &SimConfig,
) -> Result<ExitCode> {
    let scenario = scenario.load()?;
    let out = harness::run_experiment(&scenario, config)?;
    if let Some(path) = log {
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        out.log.write_to(BufWriter::new(file))?;
    }
    let r = &out.report;
    if json {
        println!("{}", serde_json::to_string_pretty(r)?);
    } else {
        println!(
            "layout {} seed {} {} leader={} complete={} task_time={:.2}s mean_distance={:.3}m overlap={:.3}",
            r.layout_id,
            r.seed,
            r.condition,
            r.leader,
            r.complete,
            r.task_time,
            r.mean_distance,
            r.trajectory_overlap
        );
        println!("final_hash {}", out.log.header.final_hash);
    }
    Ok(if r.complete {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INCOMPLETE)
    })
}

fn replay(path: PathBuf) -> Result<ExitCode> {
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let log = EventLog::read_from(BufReader::new(file))?;
    match harness::replay(&log) {
        Ok(hash) => {
            println!("ok {hash}");
            Ok(ExitCode::SUCCESS)
        }
        Err(e @ HarnessError::Divergence { .. }) => {
            eprintln!("{e}");
            Ok(ExitCode::from(EXIT_DIVERGED))
        }
        Err(e) => Err(e.into()),
    }
}

fn compare(
    layouts: Vec<u8>,
    seeds: u64,
    csv: Option<PathBuf>,
    config: &SimConfig,
) -> Result<ExitCode> {
    if seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let c = harness::compare_conditions(&layouts, seeds, config)?;
    print!("{}", c.table());
    if let Some(path) = csv {
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        c.write_csv(BufWriter::new(file))?;
    }
    let incomplete: usize = c.groups.iter().map(|g| g.incomplete).sum();
    Ok(if incomplete == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INCOMPLETE)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(expand_layouts(std::env::args().collect()));
    let result = SimConfig::from_env()
        .context("loading SIM_CONFIG")
        .and_then(|config| match cli.command {
            Command::Run {
                scenario,
                log,
                json,
            } => run(scenario, log, json, &config),
            Command::Replay { log } => replay(log),
            Command::Compare {
                layouts,
                seeds,
                csv,
            } => compare(layouts, seeds, csv, &config),
            Command::Serve {
                port,
                host,
                scenario,
                ticks,
            } => {
                let scenario = scenario.load()?;
                serve::serve(&host, port, scenario, config, ticks)?;
                Ok(ExitCode::SUCCESS)
            }
        });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
