//! NDJSON event log: one header line, then per-tick inbound, outbound and
//! pose records in the order they happened.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::SimConfig;
use crate::geometry::Pose2D;
use crate::protocol::{from_json_value, to_json_value, Envelope};
use crate::sim::Scenario;

use super::HarnessError;

pub const LOG_FORMAT: &str = "awaresim-log/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub format: String,
    pub scenario: Scenario,
    pub config: SimConfig,
    /// Number of simulation steps taken.
    pub ticks: u64,
    pub complete: bool,
    pub final_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogRecord {
    /// Delivered to the world before step `tick`.
    In { tick: u64, envelope: Envelope },
    /// Emitted by the world during step `tick`.
    Out { tick: u64, envelope: Envelope },
    /// Poses after step `tick` and a short state hash.
    Tick {
        tick: u64,
        robot: Pose2D,
        local: Pose2D,
        hash: String,
    },
}

impl LogRecord {
    pub fn tick(&self) -> u64 {
        match self {
            LogRecord::In { tick, .. }
            | LogRecord::Out { tick, .. }
            | LogRecord::Tick { tick, .. } => *tick,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum RawRecord {
    In {
        tick: u64,
        envelope: Value,
    },
    Out {
        tick: u64,
        envelope: Value,
    },
    Tick {
        tick: u64,
        robot: Pose2D,
        local: Pose2D,
        hash: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
}

fn bad_line(line: usize, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Log {
        line,
        message: e.to_string(),
    }
}

impl EventLog {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), HarnessError> {
        serde_json::to_writer(&mut w, &self.header).map_err(|e| bad_line(1, e))?;
        w.write_all(b"\n")?;
        for (i, r) in self.records.iter().enumerate() {
            let raw = match r {
                LogRecord::In { tick, envelope } => RawRecord::In {
                    tick: *tick,
                    envelope: to_json_value(envelope)?,
                },
                LogRecord::Out { tick, envelope } => RawRecord::Out {
                    tick: *tick,
                    envelope: to_json_value(envelope)?,
                },
                LogRecord::Tick {
                    tick,
                    robot,
                    local,
                    hash,
                } => RawRecord::Tick {
                    tick: *tick,
                    robot: *robot,
                    local: *local,
                    hash: hash.clone(),
                },
            };
            serde_json::to_writer(&mut w, &raw).map_err(|e| bad_line(i + 2, e))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, HarnessError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, HarnessError> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| bad_line(1, "empty log"))?;
        let header: LogHeader = serde_json::from_str(&first?).map_err(|e| bad_line(1, e))?;
        if header.format != LOG_FORMAT {
            return Err(bad_line(
                1,
                format!("unsupported log format {:?}", header.format),
            ));
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let line = line?;
            let n = i + 1;
            let raw: RawRecord = serde_json::from_str(&line).map_err(|e| bad_line(n, e))?;
            records.push(match raw {
                RawRecord::In { tick, envelope } => LogRecord::In {
                    tick,
                    envelope: from_json_value(envelope).map_err(|e| bad_line(n, e))?,
                },
                RawRecord::Out { tick, envelope } => LogRecord::Out {
                    tick,
                    envelope: from_json_value(envelope).map_err(|e| bad_line(n, e))?,
                },
                RawRecord::Tick {
                    tick,
                    robot,
                    local,
                    hash,
                } => LogRecord::Tick {
                    tick,
                    robot,
                    local,
                    hash,
                },
            });
        }
        Ok(Self { header, records })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, HarnessError> {
        Self::read_from(bytes)
    }

    /// Pose pairs of every tick record, in order.
    pub fn track(&self) -> impl Iterator<Item = (Pose2D, Pose2D)> + '_ {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Tick { robot, local, .. } => Some((*robot, *local)),
            _ => None,
        })
    }

    pub fn inbound(&self) -> impl Iterator<Item = &Envelope> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::In { envelope, .. } => Some(envelope),
            _ => None,
        })
    }

    pub fn outbound(&self) -> impl Iterator<Item = &Envelope> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Out { envelope, .. } => Some(envelope),
            _ => None,
        })
    }
}
