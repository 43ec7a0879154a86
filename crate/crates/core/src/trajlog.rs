//! Episode trajectory logs: one record per (step, agent), line-delimited
//! JSON on disk, validated before any metric computation.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::rewards::RewardBreakdown;
use crate::{Error, Result};

/// Scenario facts a log consumer needs without the original config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMeta {
    pub n_vehicles: usize,
    pub max_steps: u64,
    pub dt: f64,
    pub arm_length: f64,
    pub lane_width: f64,
    pub lanes_per_arm: usize,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub seed: u64,
    #[serde(default)]
    pub config_hash: String,
}

/// One agent's state after one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub agent: usize,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub steer: f64,
    pub throttle: f64,
    pub reward: RewardBreakdown,
    pub in_contact: bool,
    /// First contacting step of a pair interval involving this agent.
    pub contact_onset: bool,
    pub off_road: bool,
    pub arrived: bool,
    pub in_zone: bool,
    /// Smallest normalized front-sector lidar return, in [0, 1].
    pub front_min: f64,
    /// Mean normalized lidar return over all rays, in [0, 1].
    pub lidar_mean: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
enum LogLine {
    Meta(LogMeta),
    Step(StepRecord),
}

/// A full episode: meta plus records ordered by (step, agent). Records exist
/// for every agent-step in which the agent acted; an agent's last record is
/// its arrival step (or the final step if it never arrived).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub meta: LogMeta,
    pub records: Vec<StepRecord>,
}

impl TrajectoryLog {
    pub fn new(meta: LogMeta) -> TrajectoryLog {
        TrajectoryLog {
            meta,
            records: Vec::new(),
        }
    }

    /// Termination step of the episode (0 for an empty log).
    pub fn episode_steps(&self) -> u64 {
        self.records.iter().map(|r| r.step).max().unwrap_or(0)
    }

    /// Structural checks; every metric assumes these hold.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Log(msg));
        if self.meta.n_vehicles == 0 || self.meta.max_steps == 0 {
            return fail("log meta must describe at least one vehicle and one step".into());
        }
        if !(self.meta.dt > 0.0) {
            return fail("log meta dt must be positive".into());
        }
        if self.records.is_empty() {
            return fail("log holds no step records".into());
        }
        let mut last_key: Option<(u64, usize)> = None;
        for r in &self.records {
            if r.step == 0 || r.step > self.meta.max_steps {
                return fail(format!("record step {} outside [1, max_steps]", r.step));
            }
            if r.agent >= self.meta.n_vehicles {
                return fail(format!("record agent {} out of range", r.agent));
            }
            for (name, v) in [
                ("x", r.x),
                ("y", r.y),
                ("heading", r.heading),
                ("speed", r.speed),
                ("steer", r.steer),
                ("throttle", r.throttle),
                ("reward total", r.reward.total),
            ] {
                if !v.is_finite() {
                    return fail(format!("record field {name} is not finite"));
                }
            }
            for (name, v) in [("front_min", r.front_min), ("lidar_mean", r.lidar_mean)] {
                if !(0.0..=1.0).contains(&v) {
                    return fail(format!("record field {name} = {v} outside [0, 1]"));
                }
            }
            if r.contact_onset && !r.in_contact {
                return fail("contact_onset set without in_contact".into());
            }
            let key = (r.step, r.agent);
            if let Some(prev) = last_key {
                if key <= prev {
                    return fail(format!(
                        "records out of order: ({}, {}) after ({}, {})",
                        key.0, key.1, prev.0, prev.1
                    ));
                }
            }
            last_key = Some(key);
        }
        // Per-agent step ranges must be gap-free and arrivals terminal.
        for agent in 0..self.meta.n_vehicles {
            let steps: Vec<&StepRecord> =
                self.records.iter().filter(|r| r.agent == agent).collect();
            for w in steps.windows(2) {
                if w[1].step != w[0].step + 1 {
                    return fail(format!(
                        "agent {agent} has a gap between steps {} and {}",
                        w[0].step, w[1].step
                    ));
                }
                if w[0].arrived {
                    return fail(format!(
                        "agent {agent} has records after its arrival at step {}",
                        w[0].step
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut w)
    }

    pub fn write_jsonl<W: Write>(&self, w: &mut W) -> Result<()> {
        let meta = serde_json::to_string(&LogLine::Meta(self.meta.clone()))?;
        writeln!(w, "{meta}")?;
        for r in &self.records {
            let line = serde_json::to_string(&LogLine::Step(r.clone()))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrajectoryLog> {
        Self::read_jsonl(BufReader::new(File::open(path)?))
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<TrajectoryLog> {
        let mut meta: Option<LogMeta> = None;
        let mut records = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: LogLine = serde_json::from_str(&line)
                .map_err(|e| Error::Log(format!("line {}: {e}", idx + 1)))?;
            match parsed {
                LogLine::Meta(m) => {
                    if meta.is_some() {
                        return Err(Error::Log("duplicate meta line".into()));
                    }
                    meta = Some(m);
                }
                LogLine::Step(s) => records.push(s),
            }
        }
        let meta = meta.ok_or_else(|| Error::Log("log has no meta line".into()))?;
        Ok(TrajectoryLog { meta, records })
    }
}
