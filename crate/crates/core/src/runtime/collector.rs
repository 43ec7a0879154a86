//! Actor-side rollout collection: drives an env with a policy snapshot and
//! cuts per-agent experience into fixed-horizon segments.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::segment::TrajectorySegment;
use crate::algos::{Batch, JointStepObs, ReplayBatch};
use crate::env::TrafficEnv;
use crate::policy::{sample_action, Mode, Net};
use crate::{Error, Result};

#[derive(Debug, Default)]
struct AgentAcc {
    obs: Vec<f64>,
    actions: Vec<[f64; 2]>,
    log_probs: Vec<f64>,
    rewards: Vec<f64>,
    values: Vec<f64>,
    dones: Vec<bool>,
    joint: Vec<JointStepObs>,
    min_version: u64,
}

impl AgentAcc {
    fn len(&self) -> usize {
        self.rewards.len()
    }
    fn clear(&mut self) {
        *self = AgentAcc {
            min_version: u64::MAX,
            ..AgentAcc::default()
        };
    }
}

/// Steps a (auto-resetting) env with the latest policy snapshot, accumulating
/// each agent's transitions until a full horizon is reached and emitting it as
/// a segment. Accumulators persist across calls, so a segment assembled under
/// several snapshots is stamped with the oldest contributing version.
pub struct Collector {
    env: TrafficEnv,
    env_id: usize,
    horizon: usize,
    rng: ChaCha8Rng,
    acc: Vec<AgentAcc>,
    env_steps: u64,
}

impl Collector {
    pub fn new(mut env: TrafficEnv, env_id: usize, horizon: usize, seed: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Runtime("collector horizon must be at least 1".into()));
        }
        env.auto_reset = true;
        let n = env.world.vehicles.len();
        let mut acc: Vec<AgentAcc> = (0..n).map(|_| AgentAcc::default()).collect();
        acc.iter_mut().for_each(AgentAcc::clear);
        Ok(Self {
            env,
            env_id,
            horizon,
            rng: ChaCha8Rng::seed_from_u64(seed),
            acc,
            env_steps: 0,
        })
    }

    pub fn env(&self) -> &TrafficEnv {
        &self.env
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    /// Run `horizon` env steps under `net` (published as `version`) and return
    /// every segment completed along the way.
    pub fn collect(&mut self, net: &Net, version: u64) -> Result<Vec<TrajectorySegment>> {
        self.collect_steps(net, version, self.horizon)
    }

    /// Same as [`Collector::collect`] but for an arbitrary number of steps;
    /// segments still cut at exactly `horizon` transitions per agent.
    pub fn collect_steps(
        &mut self,
        net: &Net,
        version: u64,
        steps: usize,
    ) -> Result<Vec<TrajectorySegment>> {
        let mut out = Vec::new();
        for _ in 0..steps {
            self.step_once(net, version, &mut out)?;
        }
        Ok(out)
    }

    fn step_once(
        &mut self,
        net: &Net,
        version: u64,
        out: &mut Vec<TrajectorySegment>,
    ) -> Result<()> {
        let active = self.env.observe_active()?;
        if active.is_empty() {
            return Err(Error::Runtime("no active agents to collect from".into()));
        }
        let obs_all: Vec<Vec<f64>> = active.iter().map(|(_, o)| o.clone()).collect();
        let ctce = net.cfg.mode == Mode::Ctce;
        let outputs = if ctce {
            net.forward_ctce(&obs_all)?
        } else {
            active
                .iter()
                .map(|(_, o)| net.forward(o))
                .collect::<Result<Vec<_>>>()?
        };

        let joint_flat: Vec<f64> = if ctce {
            obs_all.iter().flatten().copied().collect()
        } else {
            Vec::new()
        };

        let mut actions = Vec::with_capacity(active.len());
        let mut log_probs = Vec::with_capacity(active.len());
        for outp in &outputs {
            let (a, lp) = sample_action(outp, &mut self.rng);
            actions.push(a);
            log_probs.push(lp);
        }

        let step = self.env.step(&actions)?;
        self.env_steps += 1;

        let mut filled = Vec::new();
        for (k, (agent, obs)) in active.iter().enumerate() {
            let acc = &mut self.acc[*agent];
            acc.obs.extend_from_slice(obs);
            acc.actions.push([actions[k].steer, actions[k].throttle]);
            acc.log_probs.push(log_probs[k]);
            acc.rewards.push(step.agents[k].reward.total);
            acc.values.push(outputs[k].value);
            acc.dones.push(step.agents[k].done);
            acc.min_version = acc.min_version.min(version);
            if ctce {
                acc.joint.push(JointStepObs {
                    obs: joint_flat.clone(),
                    n_agents: active.len(),
                    self_index: k,
                });
            }
            if acc.len() == self.horizon {
                filled.push(*agent);
            }
        }

        if filled.is_empty() {
            return Ok(());
        }

        // Bootstrap values come from the post-step observations under the
        // snapshot in hand; a segment that ended its last transition with
        // done needs none.
        let now = self.env.observe_active()?;
        let now_all: Vec<Vec<f64>> = now.iter().map(|(_, o)| o.clone()).collect();
        let now_outputs = if ctce && !now_all.is_empty() {
            Some(net.forward_ctce(&now_all)?)
        } else {
            None
        };

        for agent in filled {
            let acc = &mut self.acc[agent];
            let done_last = *acc.dones.last().unwrap();
            let (bootstrap, final_obs) = if done_last {
                (0.0, Vec::new())
            } else {
                let idx = now
                    .iter()
                    .position(|(id, _)| *id == agent)
                    .ok_or_else(|| {
                        Error::Runtime("agent vanished without a done flag".into())
                    })?;
                let value = match &now_outputs {
                    Some(outs) => outs[idx].value,
                    None => net.forward(&now[idx].1)?.value,
                };
                (value, now[idx].1.clone())
            };
            let obs_dim = self.env.obs_dim();
            let seg = TrajectorySegment {
                agent,
                env_id: self.env_id,
                obs: std::mem::take(&mut acc.obs),
                obs_dim,
                actions: std::mem::take(&mut acc.actions),
                log_probs: std::mem::take(&mut acc.log_probs),
                rewards: std::mem::take(&mut acc.rewards),
                values: std::mem::take(&mut acc.values),
                dones: std::mem::take(&mut acc.dones),
                bootstrap_value: bootstrap,
                final_obs,
                joint: std::mem::take(&mut acc.joint),
                model_version: acc.min_version,
            };
            acc.clear();
            debug_assert!(seg.validate(self.horizon).is_ok());
            out.push(seg);
        }
        Ok(())
    }
}

/// Concatenate equally-shaped segments into a learner batch. Advantages and
/// returns are left for the caller to fill in.
pub fn assemble_batch(segments: &[TrajectorySegment]) -> Result<Batch> {
    if segments.is_empty() {
        return Err(Error::Runtime("cannot assemble a batch from zero segments".into()));
    }
    let horizon = segments[0].len();
    let obs_dim = segments[0].obs_dim;
    let with_joint = !segments[0].joint.is_empty();
    let mut batch = Batch {
        obs_dim,
        horizon,
        ..Batch::default()
    };
    for seg in segments {
        seg.validate(horizon)?;
        if seg.obs_dim != obs_dim {
            return Err(Error::Runtime("segments disagree on obs_dim".into()));
        }
        if seg.joint.is_empty() == with_joint {
            return Err(Error::Runtime(
                "segments mix joint-context and local-only experience".into(),
            ));
        }
        batch.obs.extend_from_slice(&seg.obs);
        batch.actions.extend_from_slice(&seg.actions);
        batch.old_log_probs.extend_from_slice(&seg.log_probs);
        batch.rewards.extend_from_slice(&seg.rewards);
        batch.values.extend_from_slice(&seg.values);
        batch.dones.extend_from_slice(&seg.dones);
        batch.bootstrap_values.push(seg.bootstrap_value);
        batch.versions.push(seg.model_version);
        batch.joint.extend_from_slice(&seg.joint);
    }
    batch.validate()?;
    Ok(batch)
}

/// Pick one uniformly random transition from each segment to build an
/// off-policy batch. Segments of equal length make this uniform over
/// transitions when the segments themselves were sampled uniformly.
pub fn replay_transitions<R: Rng>(
    segments: &[TrajectorySegment],
    rng: &mut R,
) -> Result<ReplayBatch> {
    if segments.is_empty() {
        return Err(Error::Runtime("cannot build a replay batch from zero segments".into()));
    }
    let obs_dim = segments[0].obs_dim;
    let mut batch = ReplayBatch {
        obs_dim,
        ..ReplayBatch::default()
    };
    for seg in segments {
        if seg.obs_dim != obs_dim {
            return Err(Error::Runtime("segments disagree on obs_dim".into()));
        }
        let h = seg.len();
        let t = rng.gen_range(0..h);
        batch.obs.extend_from_slice(&seg.obs[t * obs_dim..(t + 1) * obs_dim]);
        batch.actions.push(seg.actions[t]);
        batch.rewards.push(seg.rewards[t]);
        batch.dones.push(seg.dones[t]);
        let next: &[f64] = if t + 1 < h {
            &seg.obs[(t + 1) * obs_dim..(t + 2) * obs_dim]
        } else if !seg.final_obs.is_empty() {
            &seg.final_obs
        } else {
            // Terminal tail: the target zeroes out on done, any row works.
            &seg.obs[t * obs_dim..(t + 1) * obs_dim]
        };
        batch.next_obs.extend_from_slice(next);
    }
    batch.validate()?;
    Ok(batch)
}
