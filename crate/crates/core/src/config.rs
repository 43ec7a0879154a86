//! Run configuration: a small sectioned key-value text format, layered
//! defaults → file → environment → command line, and a canonical hash that
//! ties every output artifact back to the exact configuration.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::algos::Hyperparams;
use crate::metrics::EvalSetup;
use crate::policy::{Mode, NetworkConfig};
use crate::rewards::RewardConfig;
use crate::runtime::{AlgoKind, RuntimeConfig, TrainSetup};
use crate::sim::world::SimConfig;
use crate::{Error, Result};

/// Prefix for environment-variable overrides: `JUNCTION_<SECTION>_<KEY>`,
/// e.g. `JUNCTION_SIM_N_VEHICLES=8` overrides `[sim] n_vehicles`.
pub const ENV_PREFIX: &str = "JUNCTION_";

const SECTIONS: [&str; 8] = [
    "run", "sim", "rewards", "network", "algo", "runtime", "eval", "io",
];

/// The fully resolved configuration of a run. Every field has a default, so
/// an empty config file is valid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub sim: SimConfig,
    pub rewards: RewardConfig,
    pub network_mode: Mode,
    pub hidden: Vec<usize>,
    pub algo: AlgoKind,
    pub hyper: Hyperparams,
    pub runtime: RuntimeConfig,
    pub eval_episodes: usize,
    pub eval_base_seed: u64,
    pub out_dir: String,
    pub save_eval_logs: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            sim: SimConfig::default(),
            rewards: RewardConfig::default(),
            network_mode: Mode::Ctde,
            hidden: vec![256, 256],
            algo: AlgoKind::Ppo,
            hyper: Hyperparams::default(),
            runtime: RuntimeConfig::default(),
            eval_episodes: 100,
            eval_base_seed: 0,
            out_dir: "out".to_string(),
            save_eval_logs: false,
        }
    }
}

fn parse_num<T: std::str::FromStr>(path: &str, value: &str, kind: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| {
        Error::Config(format!("key '{path}' expects {kind}, got '{value}'"))
    })
}

fn parse_bool(path: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::Config(format!(
            "key '{path}' expects true or false, got '{other}'"
        ))),
    }
}

fn parse_usize_list(path: &str, value: &str) -> Result<Vec<usize>> {
    let items: Result<Vec<usize>> = value
        .split(',')
        .map(|v| parse_num::<usize>(path, v, "a comma-separated list of integers"))
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(Error::Config(format!("key '{path}' must list at least one size")));
    }
    Ok(items)
}

impl RunConfig {
    /// Apply one `section.key = value` assignment. Unknown keys are rejected
    /// by name; values are type- and shape-checked here, ranges during
    /// `validate`.
    pub fn apply_kv(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let path = format!("{section}.{key}");
        let p = path.as_str();
        match (section, key) {
            ("run", "seed") => self.seed = parse_num(p, value, "an unsigned integer")?,

            ("sim", "n_vehicles") => self.sim.n_vehicles = parse_num(p, value, "an unsigned integer")?,
            ("sim", "dt") => self.sim.dt = parse_num(p, value, "a number")?,
            ("sim", "max_steps") => self.sim.max_steps = parse_num(p, value, "an unsigned integer")?,
            ("sim", "arm_length") => self.sim.arm_length = parse_num(p, value, "a number")?,
            ("sim", "lane_width") => self.sim.lane_width = parse_num(p, value, "a number")?,
            ("sim", "lanes_per_arm") => self.sim.lanes_per_arm = parse_num(p, value, "an unsigned integer")?,
            ("sim", "checkpoint_spacing") => self.sim.checkpoint_spacing = parse_num(p, value, "a number")?,
            ("sim", "spawn_setback") => self.sim.spawn_setback = parse_num(p, value, "a number")?,
            ("sim", "spawn_headway") => self.sim.spawn_headway = parse_num(p, value, "a number")?,
            ("sim", "arrival_radius") => self.sim.arrival_radius = parse_num(p, value, "a number")?,
            ("sim", "vehicle_length") => self.sim.vehicle.length = parse_num(p, value, "a number")?,
            ("sim", "vehicle_width") => self.sim.vehicle.width = parse_num(p, value, "a number")?,
            ("sim", "wheelbase") => self.sim.vehicle.wheelbase = parse_num(p, value, "a number")?,
            ("sim", "max_steer") => self.sim.vehicle.max_steer = parse_num(p, value, "a number")?,
            ("sim", "max_accel") => self.sim.vehicle.max_accel = parse_num(p, value, "a number")?,
            ("sim", "max_brake") => self.sim.vehicle.max_brake = parse_num(p, value, "a number")?,
            ("sim", "max_speed") => self.sim.vehicle.max_speed = parse_num(p, value, "a number")?,
            ("sim", "max_reverse_speed") => self.sim.vehicle.max_reverse_speed = parse_num(p, value, "a number")?,
            ("sim", "lidar_rays") => self.sim.lidar.rays = parse_num(p, value, "an unsigned integer")?,
            ("sim", "lidar_range") => self.sim.lidar.range = parse_num(p, value, "a number")?,

            ("rewards", "c_progress") => self.rewards.c_progress = parse_num(p, value, "a number")?,
            ("rewards", "c_speed") => self.rewards.c_speed = parse_num(p, value, "a number")?,
            ("rewards", "arrival_bonus") => self.rewards.arrival_bonus = parse_num(p, value, "a number")?,
            ("rewards", "crash_penalty_per_step") => self.rewards.crash_penalty_per_step = parse_num(p, value, "a number")?,
            ("rewards", "out_of_road_penalty_per_step") => self.rewards.out_of_road_penalty_per_step = parse_num(p, value, "a number")?,
            ("rewards", "safe_distance_enabled") => self.rewards.safe_distance_enabled = parse_bool(p, value)?,
            ("rewards", "right_of_way_enabled") => self.rewards.right_of_way_enabled = parse_bool(p, value)?,
            ("rewards", "safe_distance_threshold") => self.rewards.safe_distance_threshold = parse_num(p, value, "a number")?,
            ("rewards", "front_sector_half_angle_deg") => self.rewards.front_sector_half_angle_deg = parse_num(p, value, "a number")?,

            ("network", "mode") => {
                self.network_mode = match value.trim() {
                    "ctde" => Mode::Ctde,
                    "ctce" => Mode::Ctce,
                    other => {
                        return Err(Error::Config(format!(
                            "key '{p}' expects ctde or ctce, got '{other}'"
                        )))
                    }
                }
            }
            ("network", "hidden") => self.hidden = parse_usize_list(p, value)?,

            ("algo", "name") => {
                self.algo = value.trim().parse::<AlgoKind>().map_err(|e| {
                    Error::Config(format!("key '{p}': {e}"))
                })?
            }
            ("algo", "gamma") => self.hyper.gamma = parse_num(p, value, "a number")?,
            ("algo", "lambda") => self.hyper.lambda = parse_num(p, value, "a number")?,
            ("algo", "clip_epsilon") => self.hyper.clip_epsilon = parse_num(p, value, "a number")?,
            ("algo", "learning_rate") => self.hyper.learning_rate = parse_num(p, value, "a number")?,
            ("algo", "entropy_coef") => self.hyper.entropy_coef = parse_num(p, value, "a number")?,
            ("algo", "value_coef") => self.hyper.value_coef = parse_num(p, value, "a number")?,
            ("algo", "ppo_epochs") => self.hyper.ppo_epochs = parse_num(p, value, "an unsigned integer")?,
            ("algo", "minibatch_size") => self.hyper.minibatch_size = parse_num(p, value, "an unsigned integer")?,
            ("algo", "polyak_tau") => self.hyper.polyak_tau = parse_num(p, value, "a number")?,
            ("algo", "sac_alpha") => self.hyper.sac_alpha = parse_num(p, value, "a number")?,
            ("algo", "ddpg_noise_std") => self.hyper.ddpg_noise_std = parse_num(p, value, "a number")?,

            ("runtime", "actors") => self.runtime.actors = parse_num(p, value, "an unsigned integer")?,
            ("runtime", "horizon") => self.runtime.horizon = parse_num(p, value, "an unsigned integer")?,
            ("runtime", "batch_segments") => self.runtime.batch_segments = parse_num(p, value, "an unsigned integer")?,
            ("runtime", "capacity") => self.runtime.capacity = parse_num(p, value, "an unsigned integer")?,
            ("runtime", "max_avg_version_gap") => self.runtime.max_avg_version_gap = parse_num(p, value, "an unsigned integer")?,
            ("runtime", "budget_updates") => self.runtime.budget_updates = parse_num(p, value, "an unsigned integer")?,
            ("runtime", "replay_warmup_segments") => self.runtime.replay_warmup_segments = parse_num(p, value, "an unsigned integer")?,
            ("runtime", "checkpoint_every") => self.runtime.checkpoint_every = parse_num(p, value, "an unsigned integer")?,
            ("runtime", "stats_every") => self.runtime.stats_every = parse_num(p, value, "an unsigned integer")?,
            ("runtime", "deterministic") => self.runtime.deterministic = parse_bool(p, value)?,

            ("eval", "episodes") => self.eval_episodes = parse_num(p, value, "an unsigned integer")?,
            ("eval", "base_seed") => self.eval_base_seed = parse_num(p, value, "an unsigned integer")?,

            ("io", "out_dir") => self.out_dir = value.trim().to_string(),
            ("io", "save_eval_logs") => self.save_eval_logs = parse_bool(p, value)?,

            _ => {
                return Err(Error::Config(format!(
                    "unknown config key '{p}' (section [{section}])"
                )))
            }
        }
        Ok(())
    }

    /// Every effective setting as `(section.key, value)` pairs in a fixed
    /// order — the canonical form behind the hash and `to_text`.
    pub fn canonical_entries(&self) -> Vec<(String, String)> {
        let mut e: Vec<(String, String)> = Vec::with_capacity(64);
        let mut push = |k: &str, v: String| e.push((k.to_string(), v));

        push("run.seed", self.seed.to_string());

        push("sim.n_vehicles", self.sim.n_vehicles.to_string());
        push("sim.dt", self.sim.dt.to_string());
        push("sim.max_steps", self.sim.max_steps.to_string());
        push("sim.arm_length", self.sim.arm_length.to_string());
        push("sim.lane_width", self.sim.lane_width.to_string());
        push("sim.lanes_per_arm", self.sim.lanes_per_arm.to_string());
        push("sim.checkpoint_spacing", self.sim.checkpoint_spacing.to_string());
        push("sim.spawn_setback", self.sim.spawn_setback.to_string());
        push("sim.spawn_headway", self.sim.spawn_headway.to_string());
        push("sim.arrival_radius", self.sim.arrival_radius.to_string());
        push("sim.vehicle_length", self.sim.vehicle.length.to_string());
        push("sim.vehicle_width", self.sim.vehicle.width.to_string());
        push("sim.wheelbase", self.sim.vehicle.wheelbase.to_string());
        push("sim.max_steer", self.sim.vehicle.max_steer.to_string());
        push("sim.max_accel", self.sim.vehicle.max_accel.to_string());
        push("sim.max_brake", self.sim.vehicle.max_brake.to_string());
        push("sim.max_speed", self.sim.vehicle.max_speed.to_string());
        push("sim.max_reverse_speed", self.sim.vehicle.max_reverse_speed.to_string());
        push("sim.lidar_rays", self.sim.lidar.rays.to_string());
        push("sim.lidar_range", self.sim.lidar.range.to_string());

        push("rewards.c_progress", self.rewards.c_progress.to_string());
        push("rewards.c_speed", self.rewards.c_speed.to_string());
        push("rewards.arrival_bonus", self.rewards.arrival_bonus.to_string());
        push("rewards.crash_penalty_per_step", self.rewards.crash_penalty_per_step.to_string());
        push(
            "rewards.out_of_road_penalty_per_step",
            self.rewards.out_of_road_penalty_per_step.to_string(),
        );
        push("rewards.safe_distance_enabled", self.rewards.safe_distance_enabled.to_string());
        push("rewards.right_of_way_enabled", self.rewards.right_of_way_enabled.to_string());
        push("rewards.safe_distance_threshold", self.rewards.safe_distance_threshold.to_string());
        push(
            "rewards.front_sector_half_angle_deg",
            self.rewards.front_sector_half_angle_deg.to_string(),
        );

        push(
            "network.mode",
            match self.network_mode {
                Mode::Ctde => "ctde".to_string(),
                Mode::Ctce => "ctce".to_string(),
            },
        );
        push(
            "network.hidden",
            self.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
        );

        push("algo.name", self.algo.name().to_string());
        push("algo.gamma", self.hyper.gamma.to_string());
        push("algo.lambda", self.hyper.lambda.to_string());
        push("algo.clip_epsilon", self.hyper.clip_epsilon.to_string());
        push("algo.learning_rate", self.hyper.learning_rate.to_string());
        push("algo.entropy_coef", self.hyper.entropy_coef.to_string());
        push("algo.value_coef", self.hyper.value_coef.to_string());
        push("algo.ppo_epochs", self.hyper.ppo_epochs.to_string());
        push("algo.minibatch_size", self.hyper.minibatch_size.to_string());
        push("algo.polyak_tau", self.hyper.polyak_tau.to_string());
        push("algo.sac_alpha", self.hyper.sac_alpha.to_string());
        push("algo.ddpg_noise_std", self.hyper.ddpg_noise_std.to_string());

        push("runtime.actors", self.runtime.actors.to_string());
        push("runtime.horizon", self.runtime.horizon.to_string());
        push("runtime.batch_segments", self.runtime.batch_segments.to_string());
        push("runtime.capacity", self.runtime.capacity.to_string());
        push("runtime.max_avg_version_gap", self.runtime.max_avg_version_gap.to_string());
        push("runtime.budget_updates", self.runtime.budget_updates.to_string());
        push(
            "runtime.replay_warmup_segments",
            self.runtime.replay_warmup_segments.to_string(),
        );
        push("runtime.checkpoint_every", self.runtime.checkpoint_every.to_string());
        push("runtime.stats_every", self.runtime.stats_every.to_string());
        push("runtime.deterministic", self.runtime.deterministic.to_string());

        push("eval.episodes", self.eval_episodes.to_string());
        push("eval.base_seed", self.eval_base_seed.to_string());

        push("io.out_dir", self.out_dir.clone());
        push("io.save_eval_logs", self.save_eval_logs.to_string());

        e
    }

    /// SHA-256 over the canonical entries. Two configs that resolve to the
    /// same effective settings hash identically no matter how their files
    /// were ordered or formatted. The `io` section is excluded: where
    /// artifacts land never changes what an experiment computes, so the same
    /// run hashes identically in any output directory.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"junction-config-v1\n");
        for (k, v) in self.canonical_entries() {
            if k.starts_with("io.") {
                continue;
            }
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Render the effective configuration back as config-file text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (path, value) in self.canonical_entries() {
            let (section, key) = path.split_once('.').expect("canonical paths are dotted");
            if section != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{section}]\n"));
                current = match SECTIONS.iter().find(|s| **s == section) {
                    Some(s) => s,
                    None => unreachable!("canonical sections are known"),
                };
            }
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    /// Parse config text over the defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Apply config text on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.split_once('#') {
                Some((head, _)) => head.trim(),
                None => raw.trim(),
            };
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Config(format!(
                        "line {line_no}: unknown section [{name}] (known: {})",
                        SECTIONS.join(", ")
                    )));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {line_no}: expected 'key = value', got '{line}'"
                )));
            };
            let Some(section) = section.as_deref() else {
                return Err(Error::Config(format!(
                    "line {line_no}: key '{}' appears before any [section]",
                    key.trim()
                )));
            };
            self.apply_kv(section, key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text)
    }

    /// Apply `JUNCTION_<SECTION>_<KEY>` environment overrides. Unrelated
    /// variables are ignored; a prefixed variable that maps to no known key
    /// is an error (overrides must not silently miss).
    pub fn apply_env_vars<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let Some((section, key)) = rest.split_once('_') else {
                return Err(Error::Config(format!(
                    "environment variable {name} must look like {ENV_PREFIX}<SECTION>_<KEY>"
                )));
            };
            let section = section.to_lowercase();
            let key = key.to_lowercase();
            self.apply_kv(&section, &key, &value).map_err(|e| {
                Error::Config(format!("environment variable {name}: {e}"))
            })?;
        }
        Ok(())
    }

    /// Apply overrides from the real process environment.
    pub fn apply_env(&mut self) -> Result<()> {
        let mut vars: Vec<(String, String)> = std::env::vars()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        vars.sort();
        self.apply_env_vars(vars)
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            obs_dim: self.sim.obs_dim(),
            action_dim: 2,
            hidden: self.hidden.clone(),
            mode: self.network_mode,
            pooled_width: self.hidden.first().copied().unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.rewards.validate()?;
        self.network_config().validate()?;
        self.hyper.validate()?;
        self.runtime.validate()?;
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval.episodes must be at least 1".into()));
        }
        if !self.algo.on_policy() && self.network_mode == Mode::Ctce {
            return Err(Error::Config(
                "algo.name: sac and ddpg support decentralized policies only \
                 (set network.mode = ctde)"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Assemble the training job this config describes.
    pub fn train_setup(&self, verbose: bool, write_files: bool) -> Result<TrainSetup> {
        self.validate()?;
        Ok(TrainSetup {
            sim: self.sim.clone(),
            rewards: self.rewards.clone(),
            net: self.network_config(),
            hyper: self.hyper.clone(),
            algo: self.algo,
            runtime: self.runtime.clone(),
            seed: self.seed,
            out_dir: write_files.then(|| std::path::PathBuf::from(&self.out_dir)),
            config_hash: self.hash(),
            verbose,
        })
    }

    /// Assemble the evaluation protocol this config describes.
    pub fn eval_setup(&self, keep_logs: bool) -> Result<EvalSetup> {
        self.validate()?;
        Ok(EvalSetup {
            sim: self.sim.clone(),
            rewards: self.rewards.clone(),
            episodes: self.eval_episodes,
            base_seed: self.eval_base_seed,
            expected_mode: Some(self.network_mode),
            config_hash: self.hash(),
            keep_logs,
        })
    }
}
