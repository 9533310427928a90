//! Condition sweeps over layouts, seeds and leader roles.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::SimConfig;
use crate::sim::{Condition, LeaderSide, Scenario};

use super::{run_metrics, HarnessError, MetricsReport};

/// Per condition × leader means over every run in the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMeans {
    pub condition: Condition,
    pub leader: LeaderSide,
    pub runs: usize,
    pub incomplete: usize,
    pub task_time: f64,
    pub mean_distance: f64,
    pub overlap: f64,
}

/// Paired difference `a − b` per leader role.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffRow {
    pub leader: LeaderSide,
    pub a: Condition,
    pub b: Condition,
    pub task_time: f64,
    pub mean_distance: f64,
    pub overlap: f64,
    /// `mean_distance(a) / mean_distance(b)`.
    pub distance_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Every run, sorted by (condition, leader, layout, seed).
    pub runs: Vec<MetricsReport>,
    pub groups: Vec<GroupMeans>,
    pub diffs: Vec<DiffRow>,
}

#[derive(Default)]
struct Sums {
    runs: usize,
    incomplete: usize,
    task_time: f64,
    mean_distance: f64,
    overlap: f64,
}

fn group_means(runs: &[MetricsReport]) -> Vec<GroupMeans> {
    // runs arrive sorted, so sums are accumulated in a fixed order no matter
    // how the sweep was scheduled
    let mut sums: BTreeMap<(Condition, LeaderSide), Sums> = BTreeMap::new();
    for r in runs {
        let s = sums.entry((r.condition, r.leader)).or_default();
        s.runs += 1;
        s.incomplete += usize::from(!r.complete);
        s.task_time += r.task_time;
        s.mean_distance += r.mean_distance;
        s.overlap += r.trajectory_overlap;
    }
    sums.into_iter()
        .map(|((condition, leader), s)| {
            let n = s.runs as f64;
            GroupMeans {
                condition,
                leader,
                runs: s.runs,
                incomplete: s.incomplete,
                task_time: s.task_time / n,
                mean_distance: s.mean_distance / n,
                overlap: s.overlap / n,
            }
        })
        .collect()
}

/// Runs every (layout, seed 1..=seeds, leader) under both conditions `a`
/// and `b` and tabulates the means and their differences.
pub fn compare(
    a: Condition,
    b: Condition,
    layouts: &[u8],
    seeds: u64,
    leaders: &[LeaderSide],
    config: &SimConfig,
) -> Result<Comparison, HarnessError> {
    let mut conditions = vec![a, b];
    conditions.dedup();
    let mut jobs = Vec::new();
    for &layout in layouts {
        let base = Scenario::layout(layout)?;
        for &condition in &conditions {
            for &leader in leaders {
                for seed in 1..=seeds {
                    jobs.push(
                        base.clone()
                            .with_condition(condition)
                            .with_leader(leader)
                            .with_seed(seed),
                    );
                }
            }
        }
    }
    let mut runs = jobs
        .par_iter()
        .map(|s| run_metrics(s, config))
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by(|x, y| {
        (x.condition, x.leader, x.layout_id, x.seed).cmp(&(
            y.condition,
            y.leader,
            y.layout_id,
            y.seed,
        ))
    });
    let groups = group_means(&runs);
    let find =
        |c: Condition, l: LeaderSide| groups.iter().find(|g| g.condition == c && g.leader == l);
    let diffs = leaders
        .iter()
        .filter_map(|&leader| {
            let (ga, gb) = (find(a, leader)?, find(b, leader)?);
            Some(DiffRow {
                leader,
                a,
                b,
                task_time: ga.task_time - gb.task_time,
                mean_distance: ga.mean_distance - gb.mean_distance,
                overlap: ga.overlap - gb.overlap,
                distance_ratio: ga.mean_distance / gb.mean_distance,
            })
        })
        .collect();
    Ok(Comparison {
        runs,
        groups,
        diffs,
    })
}

/// TeleAware against Standard for both leader roles.
pub fn compare_conditions(
    layouts: &[u8],
    seeds: u64,
    config: &SimConfig,
) -> Result<Comparison, HarnessError> {
    compare(
        Condition::Teleaware,
        Condition::Standard,
        layouts,
        seeds,
        &[LeaderSide::Local, LeaderSide::Remote],
        config,
    )
}

impl Comparison {
    pub fn group(&self, condition: Condition, leader: LeaderSide) -> Option<&GroupMeans> {
        self.groups
            .iter()
            .find(|g| g.condition == condition && g.leader == leader)
    }

    pub fn diff(&self, leader: LeaderSide) -> Option<&DiffRow> {
        self.diffs.iter().find(|d| d.leader == leader)
    }

    /// Group means followed by one `diff` row per leader role.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "condition",
            "leader",
            "runs",
            "incomplete",
            "task_time_s",
            "mean_distance_m",
            "overlap",
        ])?;
        for g in &self.groups {
            out.write_record([
                g.condition.as_str().to_string(),
                g.leader.as_str().to_string(),
                g.runs.to_string(),
                g.incomplete.to_string(),
                format!("{:.3}", g.task_time),
                format!("{:.4}", g.mean_distance),
                format!("{:.4}", g.overlap),
            ])?;
        }
        for d in &self.diffs {
            out.write_record([
                format!("{}-{}", d.a.as_str(), d.b.as_str()),
                d.leader.as_str().to_string(),
                String::new(),
                String::new(),
                format!("{:.3}", d.task_time),
                format!("{:.4}", d.mean_distance),
                format!("{:.4}", d.overlap),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<10} {:<7} {:>5} {:>6} {:>10} {:>10} {:>8}",
            "condition", "leader", "runs", "incomp", "time[s]", "dist[m]", "overlap"
        );
        for g in &self.groups {
            let _ = writeln!(
                s,
                "{:<10} {:<7} {:>5} {:>6} {:>10.1} {:>10.3} {:>8.3}",
                g.condition.as_str(),
                g.leader.as_str(),
                g.runs,
                g.incomplete,
                g.task_time,
                g.mean_distance,
                g.overlap
            );
        }
        for d in &self.diffs {
            let _ = writeln!(
                s,
                "{:<10} {:<7} {:>5} {:>6} {:>+10.1} {:>+10.3} {:>+8.3}  (distance ratio {:.3})",
                "diff",
                d.leader.as_str(),
                "",
                "",
                d.task_time,
                d.mean_distance,
                d.overlap,
                d.distance_ratio
            );
        }
        s
    }
}
