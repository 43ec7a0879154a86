//! Deterministic policy gradient with target networks and additive
//! exploration noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algos::{Adam, CriticNet, Hyperparams, ReplayBatch};
use crate::policy::{Mode, ModelParameters, Net, PolicyOutput, UpstreamGrad};
use crate::sim::Action;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DdpgStats {
    pub version: u64,
    pub critic_loss: f64,
    pub actor_loss: f64,
}

pub struct DdpgLearner {
    actor: Net,
    actor_target: Net,
    critic: CriticNet,
    critic_target: CriticNet,
    opt_actor: Adam,
    opt_critic: Adam,
    hyper: Hyperparams,
    version: u64,
}

impl DdpgLearner {
    pub fn new(params: &ModelParameters, hyper: &Hyperparams, seed: u64) -> Result<DdpgLearner> {
        hyper.validate()?;
        let actor = Net::from_params(params)?;
        if actor.cfg.mode != Mode::Ctde {
            return Err(Error::Config(
                "the off-policy learners support decentralized policies only".into(),
            ));
        }
        let critic = CriticNet::init(actor.cfg.obs_dim, &actor.cfg.hidden, seed ^ 0xdd96)?;
        let opt_actor = Adam::new(actor.param_count(), hyper.learning_rate);
        let opt_critic = Adam::new(critic.param_count(), hyper.learning_rate);
        Ok(DdpgLearner {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            opt_actor,
            opt_critic,
            hyper: hyper.clone(),
            version: params.version,
        })
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn snapshot(&self) -> ModelParameters {
        self.actor.to_params(self.version)
    }

    pub fn update(&mut self, batch: &ReplayBatch) -> Result<DdpgStats> {
        batch.validate()?;
        if batch.obs_dim != self.actor.cfg.obs_dim {
            return Err(Error::Runtime(format!(
                "replay batch obs_dim {} does not match network obs_dim {}",
                batch.obs_dim, self.actor.cfg.obs_dim
            )));
        }
        let n = batch.len();
        let nf = n as f64;

        let targets = ddpg_targets(
            &self.actor_target,
            &self.critic_target,
            batch,
            self.hyper.gamma,
        )?;

        // Critic regression toward the target values.
        let mut critic_loss = 0.0;
        let mut grad = vec![0.0; self.critic.param_count()];
        for i in 0..n {
            let (q, tape) = self
                .critic
                .forward_cached(batch.obs_row(i), &batch.actions[i]);
            let err = q - targets[i];
            critic_loss += err * err / nf;
            let (g, _) = self.critic.backward(&tape, 2.0 * err / nf);
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += gi;
            }
        }
        let mut flat = self.critic.flatten();
        self.opt_critic.step(&mut flat, &grad);
        self.critic.set_from_flat(&flat)?;

        // Actor ascends Q(s, tanh(mean(s))).
        let (actor_loss, grad) = ddpg_actor_loss_grad(&self.actor, &self.critic, batch)?;
        let mut flat = self.actor.flatten();
        self.opt_actor.step(&mut flat, &grad);
        self.actor.set_from_flat(&flat)?;

        let tau = self.hyper.polyak_tau;
        self.critic_target.polyak_from(&self.critic, tau);
        let online = self.actor.flatten();
        let mut target = self.actor_target.flatten();
        for (t, o) in target.iter_mut().zip(&online) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        self.actor_target.set_from_flat(&target)?;

        self.version += 1;
        Ok(DdpgStats {
            version: self.version,
            critic_loss,
            actor_loss,
        })
    }

    #[cfg(test)]
    pub(crate) fn parts(&self) -> (&Net, &Net, &CriticNet, &CriticNet) {
        (
            &self.actor,
            &self.actor_target,
            &self.critic,
            &self.critic_target,
        )
    }
}

/// y = r + gamma * (1 - done) * Q'(s', tanh(mean'(s'))).
pub(crate) fn ddpg_targets(
    actor_target: &Net,
    critic_target: &CriticNet,
    batch: &ReplayBatch,
    gamma: f64,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(batch.len());
    for i in 0..batch.len() {
        let next = batch.next_obs_row(i);
        let pol = actor_target.forward(next)?;
        let a = [pol.mean[0].tanh(), pol.mean[1].tanh()];
        let live = if batch.dones[i] { 0.0 } else { 1.0 };
        out.push(batch.rewards[i] + gamma * live * critic_target.forward(next, &a));
    }
    Ok(out)
}

/// Actor loss -mean(Q(s, tanh(mean(s)))) and its parameter gradient.
pub(crate) fn ddpg_actor_loss_grad(
    actor: &Net,
    critic: &CriticNet,
    batch: &ReplayBatch,
) -> Result<(f64, Vec<f64>)> {
    let n = batch.len();
    let nf = n as f64;
    let mut loss = 0.0;
    let mut tapes = Vec::with_capacity(n);
    let mut ups = Vec::with_capacity(n);
    for i in 0..n {
        let obs = batch.obs_row(i);
        let (pol, tape) = actor.forward_cached(obs)?;
        let a = [pol.mean[0].tanh(), pol.mean[1].tanh()];
        let (q, qtape) = critic.forward_cached(obs, &a);
        let (_, d_action) = critic.backward(&qtape, 1.0);
        loss -= q / nf;
        let mut up = UpstreamGrad::default();
        for k in 0..2 {
            let t = pol.mean[k].tanh();
            up.d_mean[k] = -d_action[k] * (1.0 - t * t) / nf;
        }
        tapes.push(tape);
        ups.push(up);
    }
    let grad = actor.backward(&tapes, &ups)?;
    Ok((loss, grad))
}

/// Exploration action: tanh(mean) plus clipped Gaussian noise.
pub fn ddpg_behavior_action(out: &PolicyOutput, noise_std: f64, rng: &mut ChaCha8Rng) -> Action {
    let mut a = [out.mean[0].tanh(), out.mean[1].tanh()];
    for v in a.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = (*v + noise_std * z).clamp(-1.0, 1.0);
    }
    Action {
        steer: a[0],
        throttle: a[1],
    }
}
