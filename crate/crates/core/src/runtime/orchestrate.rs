//! End-to-end training runs: actor threads feed a segment buffer, the learner
//! consumes batches, publishes parameters, and writes stats and checkpoints.

use std::io::Write as _;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::buffer::{BufferConfig, BufferMode, SegmentBuffer};
use super::collector::{assemble_batch, replay_transitions, Collector};
use super::segment::TrajectorySegment;
use super::store::ParamStore;
use crate::algos::{
    normalize_advantages, DdpgLearner, Hyperparams, PpoLearner, ReplayBatch, SacLearner,
};
use crate::env::TrafficEnv;
use crate::policy::{init_params, save_checkpoint, Mode, ModelParameters, Net, NetworkConfig};
use crate::rewards::RewardConfig;
use crate::sim::world::SimConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoKind {
    Ppo,
    Sac,
    Ddpg,
}

impl AlgoKind {
    pub fn name(&self) -> &'static str {
        match self {
            AlgoKind::Ppo => "ppo",
            AlgoKind::Sac => "sac",
            AlgoKind::Ddpg => "ddpg",
        }
    }

    pub fn on_policy(&self) -> bool {
        matches!(self, AlgoKind::Ppo)
    }
}

impl FromStr for AlgoKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<AlgoKind> {
        match s {
            "ppo" => Ok(AlgoKind::Ppo),
            "sac" => Ok(AlgoKind::Sac),
            "ddpg" => Ok(AlgoKind::Ddpg),
            other => Err(Error::Config(format!(
                "unknown algorithm '{other}': allowed values are ppo, sac, ddpg"
            ))),
        }
    }
}

/// Knobs of the actor–learner loop itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeConfig {
    pub actors: usize,
    /// Steps per trajectory segment.
    pub horizon: usize,
    /// Segments consumed per on-policy update.
    pub batch_segments: usize,
    /// Segment queue capacity (on-policy) or replay window (off-policy).
    pub capacity: usize,
    /// Mean publish-version lag beyond which queued batches are trimmed.
    pub max_avg_version_gap: u64,
    /// Total learner updates to run; each one publishes exactly once.
    pub budget_updates: u64,
    /// Segments that must be buffered before off-policy updates begin.
    pub replay_warmup_segments: usize,
    /// Write a checkpoint every this many updates (0: only the final one).
    pub checkpoint_every: u64,
    /// Emit a stats line every this many updates (0: only the final one).
    pub stats_every: u64,
    /// Single-threaded synchronous mode: bit-for-bit reproducible runs.
    pub deterministic: bool,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            actors: 1,
            horizon: 32,
            batch_segments: 64,
            capacity: 256,
            max_avg_version_gap: 8,
            budget_updates: 100,
            replay_warmup_segments: 64,
            checkpoint_every: 0,
            stats_every: 10,
            deterministic: false,
        }
    }
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.actors == 0 {
            return Err(Error::Config("actors must be at least 1".into()));
        }
        if self.budget_updates == 0 {
            return Err(Error::Config("budget_updates must be at least 1".into()));
        }
        if self.replay_warmup_segments == 0 {
            return Err(Error::Config("replay_warmup_segments must be at least 1".into()));
        }
        if self.replay_warmup_segments > self.capacity {
            return Err(Error::Config(
                "replay_warmup_segments cannot exceed the buffer capacity".into(),
            ));
        }
        if self.deterministic && self.actors != 1 {
            return Err(Error::Config(
                "deterministic mode requires exactly 1 actor".into(),
            ));
        }
        self.buffer_config().validate()
    }

    fn buffer_config(&self) -> BufferConfig {
        BufferConfig {
            horizon: self.horizon,
            batch_segments: self.batch_segments,
            capacity: self.capacity,
            max_avg_version_gap: self.max_avg_version_gap,
            mode: BufferMode::Fifo, // overridden per algorithm
        }
    }
}

/// Everything a training run needs.
#[derive(Debug, Clone)]
pub struct TrainSetup {
    pub sim: SimConfig,
    pub rewards: RewardConfig,
    pub net: NetworkConfig,
    pub hyper: Hyperparams,
    pub algo: AlgoKind,
    pub runtime: RuntimeConfig,
    pub seed: u64,
    /// Where stats, checkpoints, and the manifest go; None skips all file IO.
    pub out_dir: Option<PathBuf>,
    pub config_hash: String,
    /// Echo stats lines to stdout.
    pub verbose: bool,
}

impl TrainSetup {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.rewards.validate()?;
        self.net.validate()?;
        self.hyper.validate()?;
        self.runtime.validate()?;
        if self.net.obs_dim != self.sim.obs_dim() {
            return Err(Error::Config(format!(
                "network obs_dim {} does not match the {} the simulator produces",
                self.net.obs_dim,
                self.sim.obs_dim()
            )));
        }
        if !self.algo.on_policy() && self.net.mode == Mode::Ctce {
            return Err(Error::Config(
                "the off-policy learners support decentralized policies only".into(),
            ));
        }
        Ok(())
    }

    fn hash_or_placeholder(&self) -> String {
        if self.config_hash.len() >= 16 && self.config_hash.is_ascii() {
            self.config_hash.clone()
        } else {
            "0".repeat(16)
        }
    }
}

/// Counters summarizing a finished run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStats {
    pub env_steps: u64,
    pub env_steps_per_sec: f64,
    pub updates: u64,
    pub updates_per_min: f64,
    pub version: u64,
    pub produced: u64,
    pub consumed: u64,
    pub discarded: u64,
    pub queued: u64,
    pub discard_fraction: f64,
    pub last_batch_mean_gap: f64,
    pub wall_seconds: f64,
}

#[derive(Debug)]
pub struct TrainReport {
    pub stats: RunStats,
    pub final_params: ModelParameters,
    pub checkpoint: Option<PathBuf>,
    /// One structured record per update, in order.
    pub update_lines: Vec<serde_json::Value>,
}

enum AnyLearner {
    Ppo(PpoLearner),
    Sac(SacLearner),
    Ddpg(DdpgLearner),
}

impl AnyLearner {
    fn new(
        algo: AlgoKind,
        params: &ModelParameters,
        hyper: &Hyperparams,
        seed: u64,
    ) -> Result<AnyLearner> {
        Ok(match algo {
            AlgoKind::Ppo => AnyLearner::Ppo(PpoLearner::new(params, hyper, seed)?),
            AlgoKind::Sac => AnyLearner::Sac(SacLearner::new(params, hyper, seed)?),
            AlgoKind::Ddpg => AnyLearner::Ddpg(DdpgLearner::new(params, hyper, seed)?),
        })
    }

    fn version(&self) -> u64 {
        match self {
            AnyLearner::Ppo(l) => l.version(),
            AnyLearner::Sac(l) => l.version(),
            AnyLearner::Ddpg(l) => l.version(),
        }
    }

    fn snapshot(&self) -> ModelParameters {
        match self {
            AnyLearner::Ppo(l) => l.snapshot(),
            AnyLearner::Sac(l) => l.snapshot(),
            AnyLearner::Ddpg(l) => l.snapshot(),
        }
    }

    fn update_on_policy(
        &mut self,
        segments: Vec<TrajectorySegment>,
        hyper: &Hyperparams,
    ) -> Result<serde_json::Value> {
        let AnyLearner::Ppo(l) = self else {
            return Err(Error::Runtime(
                "segment batches feed the on-policy learner only".into(),
            ));
        };
        let mut batch = assemble_batch(&segments)?;
        batch.compute_gae(hyper.gamma, hyper.lambda)?;
        normalize_advantages(&mut batch)?;
        let mean_gap = batch.mean_version_gap(l.version());
        let s = l.update(&batch)?;
        Ok(json!({
            "version": s.version,
            "policy_loss": s.policy_loss,
            "value_loss": s.value_loss,
            "entropy": s.entropy,
            "clip_fraction": s.clip_fraction,
            "approx_kl": s.approx_kl,
            "post_kl": s.post_kl,
            "samples": s.samples,
            "batch_mean_version_gap": mean_gap,
        }))
    }

    fn update_off_policy(&mut self, batch: &ReplayBatch) -> Result<serde_json::Value> {
        match self {
            AnyLearner::Sac(l) => {
                let s = l.update(batch)?;
                Ok(json!({
                    "version": s.version,
                    "critic_loss": s.critic_loss,
                    "actor_loss": s.actor_loss,
                    "mean_q": s.mean_q,
                    "samples": batch.len(),
                }))
            }
            AnyLearner::Ddpg(l) => {
                let s = l.update(batch)?;
                Ok(json!({
                    "version": s.version,
                    "critic_loss": s.critic_loss,
                    "actor_loss": s.actor_loss,
                    "samples": batch.len(),
                }))
            }
            AnyLearner::Ppo(_) => Err(Error::Runtime(
                "replay batches feed the off-policy learners only".into(),
            )),
        }
    }
}

fn actor_env_seed(base: u64, actor: usize) -> u64 {
    base.wrapping_add(1_000_003u64.wrapping_mul(actor as u64 + 1))
}

fn actor_rng_seed(base: u64, actor: usize) -> u64 {
    base.wrapping_add(2_000_003u64.wrapping_mul(actor as u64 + 1))
}

fn make_collector(setup: &TrainSetup, actor: usize) -> Result<Collector> {
    let mut env = TrafficEnv::new(
        setup.sim.clone(),
        setup.rewards.clone(),
        actor_env_seed(setup.seed, actor),
    )?;
    env.set_config_hash(&setup.hash_or_placeholder());
    Collector::new(
        env,
        actor,
        setup.runtime.horizon,
        actor_rng_seed(setup.seed, actor),
    )
}

/// Closes the buffer when an actor thread exits for any reason (including a
/// panic), so a blocked learner always wakes up.
struct CloseOnExit(Arc<SegmentBuffer>);

impl Drop for CloseOnExit {
    fn drop(&mut self) {
        self.0.close();
    }
}

struct SinkFiles {
    stats: Option<std::io::BufWriter<std::fs::File>>,
    dir: Option<PathBuf>,
}

impl SinkFiles {
    fn open(out_dir: &Option<PathBuf>) -> Result<SinkFiles> {
        let Some(dir) = out_dir else {
            return Ok(SinkFiles { stats: None, dir: None });
        };
        std::fs::create_dir_all(dir)?;
        let stats = std::fs::File::create(dir.join("stats.jsonl"))?;
        Ok(SinkFiles {
            stats: Some(std::io::BufWriter::new(stats)),
            dir: Some(dir.clone()),
        })
    }

    fn write_line(&mut self, line: &serde_json::Value) -> Result<()> {
        if let Some(w) = self.stats.as_mut() {
            serde_json::to_writer(&mut *w, line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    fn finish(
        &mut self,
        setup: &TrainSetup,
        params: &ModelParameters,
        stats: &RunStats,
    ) -> Result<Option<PathBuf>> {
        if let Some(w) = self.stats.as_mut() {
            w.flush()?;
        }
        let Some(dir) = &self.dir else { return Ok(None) };
        let path = dir.join("final.ckpt");
        save_checkpoint(params, &setup.hash_or_placeholder(), &path)?;
        let manifest = json!({
            "algo": setup.algo.name(),
            "seed": setup.seed,
            "config_hash": setup.hash_or_placeholder(),
            "final_version": stats.version,
            "updates": stats.updates,
            "env_steps": stats.env_steps,
            "segments_produced": stats.produced,
            "segments_consumed": stats.consumed,
            "segments_discarded": stats.discarded,
            "segments_queued": stats.queued,
            "discard_fraction": stats.discard_fraction,
            "wall_seconds": stats.wall_seconds,
            "checkpoint": "final.ckpt",
        });
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(Some(path))
    }

    fn periodic_checkpoint(
        &self,
        setup: &TrainSetup,
        params: &ModelParameters,
    ) -> Result<()> {
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("checkpoint_{:06}.ckpt", params.version));
            save_checkpoint(params, &setup.hash_or_placeholder(), path)?;
        }
        Ok(())
    }
}

fn finalize(
    setup: &TrainSetup,
    learner: &AnyLearner,
    buffer: &SegmentBuffer,
    env_steps: u64,
    updates: u64,
    update_lines: Vec<serde_json::Value>,
    started: Instant,
    sinks: &mut SinkFiles,
) -> Result<TrainReport> {
    let wall = started.elapsed().as_secs_f64().max(1e-9);
    let b = buffer.stats();
    let stats = RunStats {
        env_steps,
        env_steps_per_sec: env_steps as f64 / wall,
        updates,
        updates_per_min: updates as f64 / (wall / 60.0),
        version: learner.version(),
        produced: b.produced,
        consumed: b.consumed,
        discarded: b.discarded,
        queued: b.queued,
        discard_fraction: b.discarded as f64 / (b.produced.max(1)) as f64,
        last_batch_mean_gap: buffer.last_batch_mean_gap(),
        wall_seconds: wall,
    };
    let final_params = learner.snapshot();
    let checkpoint = sinks.finish(setup, &final_params, &stats)?;
    if setup.verbose {
        println!("{}", serde_json::to_string(&json!({"run_complete": &stats}))?);
    }
    Ok(TrainReport {
        stats,
        final_params,
        checkpoint,
        update_lines,
    })
}

/// Run a full training job as described by `setup`. The learner performs
/// exactly `budget_updates` updates, each followed by one parameter publish.
pub fn run_training(setup: &TrainSetup) -> Result<TrainReport> {
    setup.validate()?;
    if setup.runtime.deterministic {
        run_sync(setup)
    } else {
        run_async(setup)
    }
}

/// Single-threaded synchronous loop: collect until a batch is ready, update,
/// publish, repeat. Identical setups give bit-identical runs.
fn run_sync(setup: &TrainSetup) -> Result<TrainReport> {
    let started = Instant::now();
    let mut sinks = SinkFiles::open(&setup.out_dir)?;

    let init = init_params(&setup.net, setup.seed)?;
    let store = ParamStore::new(init.clone())?;
    let mut buf_cfg = setup.runtime.buffer_config();
    buf_cfg.mode = if setup.algo.on_policy() {
        BufferMode::Fifo
    } else {
        BufferMode::Replay
    };
    let buffer = SegmentBuffer::new(buf_cfg)?;
    let mut learner = AnyLearner::new(setup.algo, &init, &setup.hyper, setup.seed ^ 0x1ea6)?;
    let mut collector = make_collector(setup, 0)?;
    let mut replay_rng = ChaCha8Rng::seed_from_u64(setup.seed ^ 0x6e91a7);

    let mut update_lines = Vec::new();
    let budget = setup.runtime.budget_updates;
    for update_idx in 1..=budget {
        let line = if setup.algo.on_policy() {
            let segments = loop {
                if let Some(segs) = buffer.try_sample_batch(learner.version())? {
                    break segs;
                }
                let snap = store.fetch();
                let net = Net::from_params(&snap)?;
                for seg in collector.collect(&net, snap.version)? {
                    buffer.push(seg)?;
                }
            };
            learner.update_on_policy(segments, &setup.hyper)?
        } else {
            while buffer.len() < setup.runtime.replay_warmup_segments {
                let snap = store.fetch();
                let net = Net::from_params(&snap)?;
                for seg in collector.collect(&net, snap.version)? {
                    buffer.push(seg)?;
                }
            }
            {
                let snap = store.fetch();
                let net = Net::from_params(&snap)?;
                for seg in collector.collect(&net, snap.version)? {
                    buffer.push(seg)?;
                }
            }
            let per_update = setup.hyper.minibatch_size.max(1);
            let segs = buffer.sample_replay(per_update, &mut replay_rng)?;
            let rb = replay_transitions(&segs, &mut replay_rng)?;
            learner.update_off_policy(&rb)?
        };
        store.publish(learner.snapshot())?;

        let cadence = setup.runtime.stats_every;
        if cadence > 0 && update_idx % cadence == 0 || update_idx == budget {
            let b = buffer.stats();
            let full = json!({
                "update": update_idx,
                "algo": setup.algo.name(),
                "stats": line,
                "env_steps": collector.env_steps(),
                "buffer": {
                    "produced": b.produced, "consumed": b.consumed,
                    "discarded": b.discarded, "queued": b.queued,
                },
            });
            if setup.verbose {
                println!("{full}");
            }
            sinks.write_line(&full)?;
        }
        update_lines.push(line);

        let every = setup.runtime.checkpoint_every;
        if every > 0 && update_idx % every == 0 && update_idx != budget {
            sinks.periodic_checkpoint(setup, &learner.snapshot())?;
        }
    }

    finalize(
        setup,
        &learner,
        &buffer,
        collector.env_steps(),
        budget,
        update_lines,
        started,
        &mut sinks,
    )
}

/// Threaded asynchronous loop: each actor owns an env and pushes segments
/// while the learner (on the calling thread) consumes, updates, publishes.
fn run_async(setup: &TrainSetup) -> Result<TrainReport> {
    let started = Instant::now();
    let mut sinks = SinkFiles::open(&setup.out_dir)?;

    let init = init_params(&setup.net, setup.seed)?;
    let store = Arc::new(ParamStore::new(init.clone())?);
    let mut buf_cfg = setup.runtime.buffer_config();
    buf_cfg.mode = if setup.algo.on_policy() {
        BufferMode::Fifo
    } else {
        BufferMode::Replay
    };
    let buffer = Arc::new(SegmentBuffer::new(buf_cfg)?);
    let mut learner = AnyLearner::new(setup.algo, &init, &setup.hyper, setup.seed ^ 0x1ea6)?;
    let mut replay_rng = ChaCha8Rng::seed_from_u64(setup.seed ^ 0x6e91a7);

    let stop = Arc::new(AtomicBool::new(false));
    let env_steps = Arc::new(AtomicU64::new(0));

    let mut actors = Vec::new();
    for a in 0..setup.runtime.actors {
        let mut collector = make_collector(setup, a)?;
        let buffer = Arc::clone(&buffer);
        let store = Arc::clone(&store);
        let stop = Arc::clone(&stop);
        let env_steps = Arc::clone(&env_steps);
        let horizon = setup.runtime.horizon as u64;
        actors.push(std::thread::spawn(move || -> Result<()> {
            let _guard = CloseOnExit(Arc::clone(&buffer));
            while !stop.load(Ordering::Relaxed) {
                let snap = store.fetch();
                let net = Net::from_params(&snap)?;
                let segments = collector.collect(&net, snap.version)?;
                env_steps.fetch_add(horizon, Ordering::Relaxed);
                for seg in segments {
                    if !buffer.push(seg)? {
                        return Ok(()); // buffer closed: run is shutting down
                    }
                }
            }
            Ok(())
        }));
    }

    let budget = setup.runtime.budget_updates;
    let mut updates_done = 0u64;
    let mut update_lines = Vec::new();
    let mut run_error: Option<Error> = None;

    'learn: for update_idx in 1..=budget {
        let line = if setup.algo.on_policy() {
            match buffer.sample_batch(learner.version())? {
                Some(segments) => learner.update_on_policy(segments, &setup.hyper)?,
                None => break 'learn, // closed early: an actor died
            }
        } else {
            if !buffer.wait_for(setup.runtime.replay_warmup_segments) {
                break 'learn;
            }
            let per_update = setup.hyper.minibatch_size.max(1);
            let segs = buffer.sample_replay(per_update, &mut replay_rng)?;
            let rb = replay_transitions(&segs, &mut replay_rng)?;
            learner.update_off_policy(&rb)?
        };
        store.publish(learner.snapshot())?;
        updates_done = update_idx;

        let cadence = setup.runtime.stats_every;
        if cadence > 0 && update_idx % cadence == 0 || update_idx == budget {
            let b = buffer.stats();
            let full = json!({
                "update": update_idx,
                "algo": setup.algo.name(),
                "stats": line,
                "env_steps": env_steps.load(Ordering::Relaxed),
                "buffer": {
                    "produced": b.produced, "consumed": b.consumed,
                    "discarded": b.discarded, "queued": b.queued,
                },
                "elapsed_s": started.elapsed().as_secs_f64(),
            });
            if setup.verbose {
                println!("{full}");
            }
            sinks.write_line(&full)?;
        }
        update_lines.push(line);

        let every = setup.runtime.checkpoint_every;
        if every > 0 && update_idx % every == 0 && update_idx != budget {
            sinks.periodic_checkpoint(setup, &learner.snapshot())?;
        }
    }

    stop.store(true, Ordering::Relaxed);
    buffer.close();
    for (i, handle) in actors.into_iter().enumerate() {
        match handle.join() {
            Ok(Ok(())) => {}
            Ok(Err(e)) => {
                run_error.get_or_insert(Error::Runtime(format!("actor {i} failed: {e}")));
            }
            Err(_) => {
                run_error.get_or_insert(Error::Runtime(format!("actor {i} panicked")));
            }
        }
    }
    if updates_done < budget && run_error.is_none() {
        run_error = Some(Error::Runtime(
            "training stopped before the update budget was spent".into(),
        ));
    }
    if let Some(e) = run_error {
        return Err(e);
    }

    finalize(
        setup,
        &learner,
        &buffer,
        env_steps.load(Ordering::Relaxed),
        updates_done,
        update_lines,
        started,
        &mut sinks,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_setup(algo: AlgoKind, mode: Mode, deterministic: bool) -> TrainSetup {
        let sim = SimConfig {
            n_vehicles: 2,
            ..SimConfig::default()
        };
        let obs_dim = sim.obs_dim();
        TrainSetup {
            sim,
            rewards: RewardConfig::default(),
            net: NetworkConfig {
                obs_dim,
                hidden: vec![8, 8],
                pooled_width: 8,
                mode,
                ..NetworkConfig::default()
            },
            hyper: Hyperparams {
                minibatch_size: 64,
                ppo_epochs: 2,
                ..Hyperparams::default()
            },
            algo,
            runtime: RuntimeConfig {
                actors: 1,
                horizon: 8,
                batch_segments: 4,
                capacity: 16,
                budget_updates: 3,
                replay_warmup_segments: 4,
                stats_every: 1,
                deterministic,
                ..RuntimeConfig::default()
            },
            seed: 17,
            out_dir: None,
            config_hash: String::new(),
            verbose: false,
        }
    }

    #[test]
    fn budget_of_n_updates_publishes_exactly_n_versions() {
        let setup = tiny_setup(AlgoKind::Ppo, Mode::Ctde, true);
        let report = run_training(&setup).unwrap();
        assert_eq!(report.stats.updates, 3);
        assert_eq!(report.stats.version, 3);
        assert_eq!(report.final_params.version, 3);
        assert_eq!(report.update_lines.len(), 3);
        let s = &report.stats;
        assert_eq!(s.produced, s.consumed + s.discarded + s.queued);
        assert!(s.env_steps > 0);
    }

    #[test]
    fn deterministic_mode_reproduces_runs_bit_for_bit() {
        let setup = tiny_setup(AlgoKind::Ppo, Mode::Ctde, true);
        let a = run_training(&setup).unwrap();
        let b = run_training(&setup).unwrap();
        assert_eq!(a.update_lines, b.update_lines);
        assert_eq!(a.final_params.values, b.final_params.values);
        assert_eq!(a.stats.env_steps, b.stats.env_steps);
        assert_eq!(a.stats.produced, b.stats.produced);
    }

    #[test]
    fn async_single_actor_completes_the_budget() {
        let setup = tiny_setup(AlgoKind::Ppo, Mode::Ctde, false);
        let report = run_training(&setup).unwrap();
        assert_eq!(report.stats.updates, 3);
        assert_eq!(report.stats.version, 3);
        let s = &report.stats;
        assert_eq!(s.produced, s.consumed + s.discarded + s.queued);
    }

    #[test]
    fn centralized_ppo_trains_end_to_end() {
        let mut setup = tiny_setup(AlgoKind::Ppo, Mode::Ctce, true);
        setup.runtime.budget_updates = 2;
        let report = run_training(&setup).unwrap();
        assert_eq!(report.stats.version, 2);
    }

    #[test]
    fn off_policy_learners_run_with_replay_buffering() {
        for algo in [AlgoKind::Sac, AlgoKind::Ddpg] {
            let mut setup = tiny_setup(algo, Mode::Ctde, true);
            setup.hyper.minibatch_size = 32;
            setup.runtime.budget_updates = 2;
            let report = run_training(&setup).unwrap();
            assert_eq!(report.stats.version, 2, "{}", algo.name());
            assert_eq!(report.stats.consumed, 0, "replay never consumes");
        }
    }

    #[test]
    fn off_policy_centralized_is_rejected_up_front() {
        let setup = tiny_setup(AlgoKind::Sac, Mode::Ctce, true);
        let err = run_training(&setup).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn artifacts_land_in_the_out_dir() {
        let dir = tempfile::tempdir().unwrap();
        let mut setup = tiny_setup(AlgoKind::Ppo, Mode::Ctde, true);
        setup.out_dir = Some(dir.path().to_path_buf());
        setup.runtime.checkpoint_every = 2;
        let report = run_training(&setup).unwrap();
        let ckpt = report.checkpoint.unwrap();
        assert!(ckpt.ends_with("final.ckpt") && ckpt.exists());
        assert!(dir.path().join("checkpoint_000002.ckpt").exists());
        assert!(dir.path().join("manifest.json").exists());
        let stats = std::fs::read_to_string(dir.path().join("stats.jsonl")).unwrap();
        assert_eq!(stats.lines().count(), 3);
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["final_version"], 3);
        // The saved checkpoint round-trips to the published parameters.
        let (params, hash) = crate::policy::load_checkpoint(&ckpt).unwrap();
        assert_eq!(params.version, 3);
        assert_eq!(hash, "0".repeat(16));
        assert_eq!(params.values, report.final_params.values);
    }

    #[test]
    fn algo_names_parse_and_unknown_names_list_choices() {
        assert_eq!("ppo".parse::<AlgoKind>().unwrap(), AlgoKind::Ppo);
        assert_eq!("sac".parse::<AlgoKind>().unwrap(), AlgoKind::Sac);
        assert_eq!("ddpg".parse::<AlgoKind>().unwrap(), AlgoKind::Ddpg);
        let err = "a2c".parse::<AlgoKind>().unwrap_err().to_string();
        assert!(err.contains("ppo, sac, ddpg"));
    }

    #[test]
    fn mismatched_network_obs_dim_is_a_config_error() {
        let mut setup = tiny_setup(AlgoKind::Ppo, Mode::Ctde, true);
        setup.net.obs_dim += 1;
        let err = run_training(&setup).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
