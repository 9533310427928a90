//! Headless experiment runner, replay checker and condition sweeps.

mod compare;
mod log;
mod metrics;

use thiserror::Error;

use crate::config::SimConfig;
use crate::protocol::{encode, Envelope, LinkQueue, ProtocolError};
use crate::sim::operator::ScriptedOperator;
use crate::sim::{Scenario, ScenarioError, World, TICK_MS};

pub use compare::{compare, compare_conditions, Comparison, DiffRow, GroupMeans};
pub use log::{EventLog, LogHeader, LogRecord, LOG_FORMAT};
pub use metrics::{
    mean, metrics_from_log, metrics_from_track, occupied_cells, trajectory_overlap, MetricsReport,
    CELL_M,
};

/// Hex digits of the per-tick state hash kept in logs.
pub const TICK_HASH_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("replay diverged at tick {tick}: {reason}")]
    Divergence { tick: u64, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub log: EventLog,
}

/// What a run keeps besides the pose track.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Recording {
    Full,
    TrackOnly,
}

struct Run {
    world: World,
    records: Vec<LogRecord>,
    track: Vec<(crate::geometry::Pose2D, crate::geometry::Pose2D)>,
}

fn short_hash(world: &World) -> String {
    let mut h = world.state_hash();
    h.truncate(TICK_HASH_LEN);
    h
}

fn cap_ticks(config: &SimConfig) -> u64 {
    (config.max_time_s * 1000.0 / TICK_MS as f64).round() as u64
}

/// Operator and site joined by two lossy links, stepped in lockstep until
/// the leader's route completes or the time cap is reached.
fn drive(
    scenario: &Scenario,
    config: &SimConfig,
    recording: Recording,
) -> Result<Run, HarnessError> {
    let mut world = World::new(scenario.clone(), config.clone())?;
    let mut operator = ScriptedOperator::new(scenario, config, config.walk_speed_mps);
    let mut uplink: LinkQueue<Envelope> = LinkQueue::new(config.link(scenario.seed, 1));
    let mut downlink: LinkQueue<Envelope> = LinkQueue::new(config.link(scenario.seed, 2));
    let full = recording == Recording::Full;
    let mut records = Vec::new();
    let mut track = Vec::new();

    for t in 0..cap_ticks(config) {
        let inbound = uplink.drain_due(t * TICK_MS);
        let outbound = world.tick(&inbound);
        let rec = world.record();
        track.push((rec.robot, rec.local));
        let now = world.sim_time_ms();
        for e in &outbound {
            downlink.send(e.channel, e.clone(), now);
        }
        if full {
            records.extend(
                inbound
                    .into_iter()
                    .map(|envelope| LogRecord::In { tick: t, envelope }),
            );
            records.extend(
                outbound
                    .into_iter()
                    .map(|envelope| LogRecord::Out { tick: t, envelope }),
            );
            records.push(LogRecord::Tick {
                tick: t,
                robot: rec.robot,
                local: rec.local,
                hash: short_hash(&world),
            });
        }
        if world.is_complete() {
            break;
        }
        for e in downlink.drain_due(now) {
            operator.observe(&e);
        }
        for e in operator.act(now) {
            uplink.send(e.channel, e, now);
        }
    }
    if !world.is_complete() {
        let envelope = world.timeout();
        if full {
            records.push(LogRecord::Out {
                tick: world.tick_count(),
                envelope,
            });
        }
    }
    Ok(Run {
        world,
        records,
        track,
    })
}

/// Runs one scenario headless and returns its report and full event log.
pub fn run_experiment(scenario: &Scenario, config: &SimConfig) -> Result<RunOutput, HarnessError> {
    let run = drive(scenario, config, Recording::Full)?;
    let log = EventLog {
        header: LogHeader {
            format: LOG_FORMAT.to_string(),
            scenario: scenario.clone(),
            config: config.clone(),
            ticks: run.world.tick_count(),
            complete: run.world.is_complete(),
            final_hash: run.world.state_hash(),
        },
        records: run.records,
    };
    let report = metrics_from_log(&log);
    Ok(RunOutput { report, log })
}

/// Same run as [`run_experiment`] without building the log; the report is
/// identical.
pub fn run_metrics(scenario: &Scenario, config: &SimConfig) -> Result<MetricsReport, HarnessError> {
    let run = drive(scenario, config, Recording::TrackOnly)?;
    Ok(metrics_from_track(
        scenario.layout_id,
        scenario.seed,
        scenario.condition(),
        scenario.leader(),
        run.world.is_complete(),
        &run.track,
    ))
}

fn diverged(tick: u64, reason: impl Into<String>) -> HarnessError {
    HarnessError::Divergence {
        tick,
        reason: reason.into(),
    }
}

/// Re-feeds the logged inbound messages into a fresh world and checks every
/// outbound message, pose and state hash against the log. Returns the final
/// world-state hash, which must match the header.
pub fn replay(log: &EventLog) -> Result<String, HarnessError> {
    let h = &log.header;
    let mut world = World::new(h.scenario.clone(), h.config.clone())?;
    let mut records = log.records.iter().peekable();
    for t in 0..h.ticks {
        let mut inbound = Vec::new();
        while let Some(LogRecord::In { tick, envelope }) = records.peek() {
            if *tick != t {
                return Err(diverged(t, format!("inbound record for tick {tick}")));
            }
            inbound.push(envelope.clone());
            records.next();
        }
        let outbound = world.tick(&inbound);
        for e in &outbound {
            match records.next() {
                Some(LogRecord::Out { tick, envelope }) if *tick == t => {
                    if encode(e)? != encode(envelope)? {
                        return Err(diverged(t, format!("{} message differs", e.kind())));
                    }
                }
                _ => return Err(diverged(t, format!("unexpected {} message", e.kind()))),
            }
        }
        let rec = world.record();
        match records.next() {
            Some(LogRecord::Tick {
                tick,
                robot,
                local,
                hash,
            }) if *tick == t => {
                if *robot != rec.robot || *local != rec.local {
                    return Err(diverged(t, "poses differ"));
                }
                if *hash != short_hash(&world) {
                    return Err(diverged(t, "state hash differs"));
                }
            }
            _ => return Err(diverged(t, "missing or extra messages")),
        }
    }
    if !h.complete {
        let e = world.timeout();
        match records.next() {
            Some(LogRecord::Out { envelope, .. }) if encode(&e)? == encode(envelope)? => {}
            _ => return Err(diverged(h.ticks, "timeout event differs")),
        }
    }
    if records.next().is_some() {
        return Err(diverged(h.ticks, "trailing records"));
    }
    if world.is_complete() != h.complete {
        return Err(diverged(h.ticks, "completion flag differs"));
    }
    let hash = world.state_hash();
    if hash != h.final_hash {
        return Err(diverged(h.ticks, "final state hash differs"));
    }
    Ok(hash)
}
